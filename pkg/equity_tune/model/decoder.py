"""
A small pre-norm decoder with a feature projector and low-rank adapters.

The decoder weights are frozen; only the projector and the adapter pairs are
trainable. A sequence is laid out as ``[projected feature tokens, instruction,
target prefix]`` with right padding, and the logits predicting target token t
sit at position ``n_feature_tokens + len(instruction) - 1 + t``.
"""

import hashlib
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import attr
import numpy as np

from ..numerics import (
    Tensor,
    add,
    concat,
    constant,
    embedding,
    gelu,
    layer_norm,
    log,
    matmul,
    mul,
    reshape,
    scale,
    slice,
    softmax,
    sum,
    transpose,
)
from ..util.exceptions import DataError, ShapeError
from .config import EOS, INSTRUCTION, PAD, ModelConfig

MASK_VALUE = -1e9
ADAPTED = ("attn.q", "attn.v", "mlp.up")


@attr.s(auto_attribs=True, frozen=True)
class ModelState:
    """
    Frozen decoder weights plus the trainable projector and adapters.

    Updates never mutate a state; ``with_trainable`` returns a new one that
    shares the frozen arrays.
    """

    config: ModelConfig
    frozen: Dict[str, Tensor]
    projector: Dict[str, Tensor]
    adapters: Dict[str, Tensor]
    instruction: Tuple[int, ...] = INSTRUCTION

    def trainable(self) -> Dict[str, Tensor]:
        """Return projector and adapter parameters keyed by name."""
        params = dict(self.projector)
        params.update(self.adapters)
        return params

    def with_trainable(self, params: Dict[str, Tensor]) -> "ModelState":
        """Return a copy with the given trainable parameters replaced."""
        unknown = set(params) - set(self.projector) - set(self.adapters)
        if unknown:
            raise KeyError(f"Unknown trainable parameters: {sorted(unknown)}")
        projector = {k: params.get(k, v) for k, v in self.projector.items()}
        adapters = {k: params.get(k, v) for k, v in self.adapters.items()}
        return attr.evolve(self, projector=projector, adapters=adapters)


@attr.s(auto_attribs=True, frozen=True)
class ForwardOutput:
    """Result of one batched forward pass."""

    logits: Tensor
    hidden: Dict[int, Tensor]
    mask: np.ndarray
    target_start: int

    @property
    def prompt_mask(self) -> np.ndarray:
        """Valid positions restricted to the feature and instruction tokens."""
        prompt = np.zeros_like(self.mask)
        prompt[:, : self.target_start + 1] = True
        return prompt


def _frozen_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    d, v = config.d_model, config.vocab_size
    shapes = {"embed": (v, d), "pos": (config.max_seq, d)}
    for layer in range(1, config.n_layers + 1):
        prefix = f"layer{layer}"
        shapes.update(
            {
                f"{prefix}.ln1.g": (d,),
                f"{prefix}.ln1.b": (d,),
                f"{prefix}.attn.q": (d, d),
                f"{prefix}.attn.k": (d, d),
                f"{prefix}.attn.v": (d, d),
                f"{prefix}.attn.o": (d, d),
                f"{prefix}.ln2.g": (d,),
                f"{prefix}.ln2.b": (d,),
                f"{prefix}.mlp.up": (config.mlp_ratio * d, d),
                f"{prefix}.mlp.down": (d, config.mlp_ratio * d),
            }
        )
    shapes.update({"final.ln.g": (d,), "final.ln.b": (d,), "head": (v, d)})
    return shapes


def init_state(config: ModelConfig, seed: int = 0) -> ModelState:
    """
    Build a model state.

    Frozen weights depend only on ``config.backbone_seed`` so every run shares
    the same backbone; the projector and adapter A factors are drawn from
    ``seed`` and every adapter B factor starts at zero.
    """
    backbone = np.random.default_rng(config.backbone_seed)
    frozen = {}
    for name, shape in _frozen_shapes(config).items():
        if name.endswith(".g"):
            frozen[name] = Tensor(np.ones(shape))
        elif name.endswith(".b"):
            frozen[name] = Tensor(np.zeros(shape))
        else:
            fan_in = shape[-1] if name not in ("embed", "pos") else 1
            frozen[name] = Tensor(
                backbone.normal(scale=1.0 / math.sqrt(fan_in), size=shape)
            )

    rng = np.random.default_rng(seed)
    d_out = config.n_feature_tokens * config.d_model
    projector = {
        "projector.W": Tensor(
            rng.normal(
                scale=1.0 / math.sqrt(config.feature_dim),
                size=(d_out, config.feature_dim),
            )
        ),
        "projector.b": Tensor(np.zeros(d_out)),
    }
    adapters = {}
    for layer in range(1, config.n_layers + 1):
        for site in ADAPTED:
            d_out, d_in = frozen[f"layer{layer}.{site}"].shape
            adapters[f"layer{layer}.{site}.A"] = Tensor(
                rng.normal(scale=1.0 / math.sqrt(d_in), size=(config.lora_rank, d_in))
            )
            adapters[f"layer{layer}.{site}.B"] = Tensor(
                np.zeros((d_out, config.lora_rank))
            )
    return ModelState(
        config=config, frozen=frozen, projector=projector, adapters=adapters
    )


def frozen_checksum(state: ModelState) -> str:
    """SHA-256 over the frozen arrays in name order."""
    digest = hashlib.sha256()
    for name in sorted(state.frozen):
        digest.update(name.encode("UTF-8"))
        digest.update(state.frozen[name].data.tobytes())
    return digest.hexdigest()


def project_features(
    projector: Dict[str, Tensor], features: Tensor, n_tokens: int
) -> Tensor:
    """Affine map of feature vectors into ``n_tokens`` embedding rows each."""
    weight, bias = projector["projector.W"], projector["projector.b"]
    if features.ndim not in (1, 2) or features.shape[-1] != weight.shape[1]:
        raise ShapeError("project_features", features.shape, weight.shape)
    projected = add(matmul(features, transpose(weight)), bias)
    width = weight.shape[0] // n_tokens
    if features.ndim == 1:
        return reshape(projected, (n_tokens, width))
    return reshape(projected, (features.shape[0], n_tokens, width))


def adapted_matmul(
    weight: Tensor, a: Tensor, b: Tensor, x: Tensor, lora_scale: float = 1.0
) -> Tensor:
    """y = W x + lora_scale * B (A x), applied over the last axis of x."""
    frozen_path = matmul(x, transpose(weight))
    low_rank = matmul(matmul(x, transpose(a)), transpose(b))
    return add(frozen_path, scale(low_rank, lora_scale))


def _affine_norm(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    return add(mul(layer_norm(x), gain), bias)


def _causal_mask(length: int) -> np.ndarray:
    return np.triu(np.full((length, length), MASK_VALUE), k=1)


def _site(state: ModelState, layer: int, site: str, x: Tensor) -> Tensor:
    name = f"layer{layer}.{site}"
    if f"{name}.A" in state.adapters:
        return adapted_matmul(
            state.frozen[name],
            state.adapters[f"{name}.A"],
            state.adapters[f"{name}.B"],
            x,
            state.config.lora_scale,
        )
    return matmul(x, transpose(state.frozen[name]))


def _attention(state: ModelState, layer: int, x: Tensor, mask: Tensor) -> Tensor:
    config = state.config
    batch, length, width = x.shape
    heads, head_dim = config.n_heads, config.head_dim

    def split(t):
        return transpose(reshape(t, (batch, length, heads, head_dim)), (0, 2, 1, 3))

    q = split(_site(state, layer, "attn.q", x))
    k = split(_site(state, layer, "attn.k", x))
    v = split(_site(state, layer, "attn.v", x))
    scores = scale(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(head_dim))
    probs = softmax(add(scores, mask))
    context = reshape(transpose(matmul(probs, v), (0, 2, 1, 3)), (batch, length, width))
    return _site(state, layer, "attn.o", context)


def _block(state: ModelState, layer: int, x: Tensor, mask: Tensor) -> Tensor:
    prefix = f"layer{layer}"
    frozen = state.frozen
    normed = _affine_norm(x, frozen[f"{prefix}.ln1.g"], frozen[f"{prefix}.ln1.b"])
    x = add(x, _attention(state, layer, normed, mask))
    normed = _affine_norm(x, frozen[f"{prefix}.ln2.g"], frozen[f"{prefix}.ln2.b"])
    up = gelu(_site(state, layer, "mlp.up", normed))
    return add(x, _site(state, layer, "mlp.down", up))


def _check_tokens(config: ModelConfig, sequences: Sequence[Sequence[int]], what: str):
    for index, tokens in enumerate(sequences):
        if any(t < 0 or t >= config.vocab_size for t in tokens):
            raise DataError(
                f"{what} {index} has a token outside 0..{config.vocab_size - 1}"
            )


def forward_batch(
    state: ModelState, features, prefixes: Sequence[Sequence[int]]
) -> ForwardOutput:
    """
    Run the decoder over a batch of feature vectors and target prefixes.

    Hidden states are captured after the block of every tapped layer.
    """
    config = state.config
    features = features if isinstance(features, Tensor) else constant(features)
    if features.ndim != 2 or features.shape[0] != len(prefixes):
        raise ShapeError("forward_batch", features.shape, (len(prefixes),))
    if not prefixes:
        raise DataError("Cannot run the decoder on an empty batch")
    _check_tokens(config, prefixes, "Target prefix")

    batch = len(prefixes)
    n_prefix = max(len(p) for p in prefixes)
    context = config.n_feature_tokens + len(state.instruction)
    length = context + n_prefix
    if length > config.max_seq:
        raise DataError(f"Sequence length {length} exceeds max_seq {config.max_seq}")

    ids = np.full((batch, len(state.instruction) + n_prefix), PAD, dtype=np.int64)
    mask = np.zeros((batch, length), dtype=bool)
    for i, prefix in enumerate(prefixes):
        ids[i, : len(state.instruction)] = state.instruction
        ids[i, len(state.instruction) : len(state.instruction) + len(prefix)] = prefix
        mask[i, : context + len(prefix)] = True

    tokens = concat(
        [
            project_features(state.projector, features, config.n_feature_tokens),
            embedding(state.frozen["embed"], ids),
        ],
        axis=1,
    )
    x = add(tokens, slice(state.frozen["pos"], np.s_[:length]))
    attention_mask = constant(_causal_mask(length))
    tapped = set(config.tapped())
    hidden = {}
    for layer in range(1, config.n_layers + 1):
        x = _block(state, layer, x, attention_mask)
        if layer in tapped:
            hidden[layer] = x
    normed = _affine_norm(x, state.frozen["final.ln.g"], state.frozen["final.ln.b"])
    logits = matmul(normed, transpose(state.frozen["head"]))
    return ForwardOutput(
        logits=logits, hidden=hidden, mask=mask, target_start=context - 1
    )


def forward_decode(state: ModelState, features, target_prefix: Sequence[int]):
    """
    Return (logits at each target position, hidden states at the tapped layers).

    The logits have ``len(target_prefix) + 1`` rows; an empty prefix yields
    the distribution of the first target token only.
    """
    features = features if isinstance(features, Tensor) else constant(features)
    if features.ndim != 1:
        raise ShapeError("forward_decode", features.shape)
    output = forward_batch(
        state, reshape(features, (1, features.shape[0])), [list(target_prefix)]
    )
    start = output.target_start
    logits = slice(output.logits, (0, np.s_[start:], np.s_[:]))
    hidden = {layer: slice(h, 0) for layer, h in output.hidden.items()}
    return logits, hidden


def sequence_nll(
    output: ForwardOutput,
    references: Sequence[Sequence[int]],
    multipliers: Optional[Sequence[float]] = None,
) -> Tuple[Tensor, np.ndarray]:
    """
    Teacher-forced negative log-likelihood of the references.

    Returns the (optionally multiplier-weighted) sum over samples and target
    positions, and each sample's unweighted mean per-token NLL.
    """
    if not references:
        raise DataError("lm_loss needs a non-empty batch")
    if any(len(r) == 0 for r in references):
        raise DataError("Every sample needs a non-empty reference")
    if multipliers is None:
        multipliers = np.ones(len(references))
    batch, vocab = len(references), output.logits.shape[-1]
    n_target = max(len(r) for r in references)
    start = output.target_start
    if output.logits.shape[1] != start + n_target:
        raise ShapeError(
            "sequence_nll", output.logits.shape, (batch, start + n_target, vocab)
        )

    gold = np.zeros((batch, n_target, vocab))
    for i, reference in enumerate(references):
        gold[i, np.arange(len(reference)), list(reference)] = 1.0
    weights = gold * np.asarray(multipliers, dtype=np.float64)[:, None, None]

    target_logits = slice(
        output.logits, (np.s_[:], np.s_[start : start + n_target], np.s_[:])
    )
    log_probs = log(softmax(target_logits))
    total = scale(sum(mul(log_probs, constant(weights))), -1.0)
    lengths = np.array([len(r) for r in references], dtype=np.float64)
    per_sample = -(log_probs.data * gold).sum(axis=(1, 2)) / lengths
    return total, per_sample


def lm_loss(
    state: ModelState,
    features,
    references: Sequence[Sequence[int]],
    multipliers: Optional[Sequence[float]] = None,
) -> Tuple[Tensor, np.ndarray]:
    """Cross-entropy of the references given features and instruction."""
    if not references:
        raise DataError("lm_loss needs a non-empty batch")
    _check_tokens(state.config, references, "Reference")
    prefixes = [list(r)[:-1] for r in references]
    output = forward_batch(state, features, prefixes)
    return sequence_nll(output, references, multipliers)


def pool_hidden(
    hidden: Dict[int, Tensor],
    mask: np.ndarray,
    layers: Optional[Sequence[int]] = None,
    token_pooling: str = "mean",
) -> Tensor:
    """
    Average hidden states over valid positions, then over tapped layers.

    With ``token_pooling="last"`` each layer contributes its state at the last
    valid position instead of the position mean.
    """
    layers = sorted(set(hidden if layers is None else layers))
    if not layers:
        raise ShapeError("pool_hidden", ())
    missing = [layer for layer in layers if layer not in hidden]
    if missing:
        raise KeyError(f"Hidden states were not captured for layers {missing}")
    mask = np.asarray(mask, dtype=np.float64)
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        empty = int(np.argmax(counts == 0))
        raise DataError(f"Sample {empty} has no valid positions to pool")
    if token_pooling == "last":
        weights = np.zeros_like(mask)
        weights[np.arange(mask.shape[0]), counts.astype(np.int64) - 1] = 1.0
    else:
        weights = mask / counts[:, None]
    batch, length = mask.shape
    weights = constant(weights.reshape(batch, 1, length))

    pooled = None
    for layer in layers:
        per_layer = reshape(
            matmul(weights, hidden[layer]), (batch, hidden[layer].shape[-1])
        )
        pooled = per_layer if pooled is None else add(pooled, per_layer)
    return scale(pooled, 1.0 / len(layers))


def pool_prompt(state: ModelState, output: ForwardOutput) -> Tensor:
    """
    Pooled representation h(x) of a forward pass.

    Only prompt positions are pooled. Attention is causal, so these states do
    not depend on the target tokens that follow.
    """
    return pool_hidden(
        output.hidden, output.prompt_mask, token_pooling=state.config.token_pooling
    )


def pooled_states(state: ModelState, features) -> Tensor:
    """h(x) for a batch of feature vectors, from a forward pass over the prompt."""
    features = np.asarray(features, dtype=np.float64)
    prefixes = [[] for _ in range(features.shape[0])]
    return pool_prompt(state, forward_batch(state, features, prefixes))


def greedy_token(logits: np.ndarray) -> int:
    """Argmax over the last axis; ties go to the lowest token id."""
    return int(np.argmax(logits))


def generate_batch(
    state: ModelState, features: np.ndarray, max_new: int
) -> List[List[int]]:
    """Greedy decoding for a batch, stopping at EOS or after max_new tokens."""
    if max_new < 1:
        raise ValueError(f"max_new must be >= 1, got {max_new}")
    config = state.config
    room = config.max_seq - config.n_feature_tokens - len(state.instruction) + 1
    if max_new > room:
        logging.debug(f"Capping max_new {max_new} at {room} to fit max_seq")
        max_new = room

    features = np.asarray(features, dtype=np.float64)
    generated: List[List[int]] = [[] for _ in range(features.shape[0])]
    done = [False] * len(generated)
    for step in range(max_new):
        prefixes = [g + [PAD] * (step - len(g)) for g in generated]
        output = forward_batch(state, features, prefixes)
        position = output.target_start + step
        for i, tokens in enumerate(generated):
            if done[i]:
                continue
            token = greedy_token(output.logits.data[i, position])
            if token == EOS:
                done[i] = True
            else:
                tokens.append(token)
        if all(done):
            break
    return generated


def generate(state: ModelState, features, max_new: int) -> List[int]:
    """Greedy decoding for one feature vector."""
    features = np.asarray(features, dtype=np.float64)[None, :]
    return generate_batch(state, features, max_new)[0]
