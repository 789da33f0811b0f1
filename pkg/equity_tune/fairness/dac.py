"""Demographic attribute classifier heads and their weighted cross-entropy."""

import logging
import math
from typing import Dict, Mapping, Sequence, Tuple

import attr
import numpy as np

from ..numerics import (
    Tensor,
    add,
    constant,
    detach,
    gelu,
    log,
    matmul,
    mul,
    scale,
    softmax,
    sum,
    transpose,
)
from ..util.exceptions import DataError, ShapeError
from .schema import AttributeSchema

DEFAULT_HIDDEN = 32
HEAD_PARAMS = ("W1", "b1", "W2", "b2")


@attr.s(auto_attribs=True, frozen=True)
class DacHead:
    """
    Two-layer perceptron mapping a pooled hidden state to group logits.

    Parameters are held as tensors keyed ``W1`` (hidden x d_model), ``b1``,
    ``W2`` (groups x hidden) and ``b2``.
    """

    attribute: str
    groups: Tuple[str, ...]
    params: Dict[str, Tensor] = attr.ib()

    @params.validator
    def validate_params(self, attribute, value):
        """Check parameter names and that the output width matches the groups."""
        if set(value) != set(HEAD_PARAMS):
            raise ValueError(
                f"DAC head needs parameters {HEAD_PARAMS}, got {sorted(value)}."
            )
        if value["W2"].shape[0] != len(self.groups):
            raise ValueError(
                f"Head for {self.attribute} has {value['W2'].shape[0]} outputs "
                f"for {len(self.groups)} groups."
            )

    @property
    def d_model(self) -> int:
        """Input width."""
        return self.params["W1"].shape[1]

    def named_params(self) -> Dict[str, Tensor]:
        """Parameters keyed ``attribute.name`` for optimizers and checkpoints."""
        return {f"{self.attribute}.{name}": t for name, t in self.params.items()}

    def with_params(self, named: Mapping[str, Tensor]) -> "DacHead":
        """Return a copy with parameters replaced from a ``named_params`` mapping."""
        params = {
            name: named.get(f"{self.attribute}.{name}", t)
            for name, t in self.params.items()
        }
        return attr.evolve(self, params=params)

    def detached(self) -> "DacHead":
        """Copy whose parameters carry no gradient."""
        return attr.evolve(self, params={k: detach(v) for k, v in self.params.items()})


def init_head(
    attribute: str,
    groups: Sequence[str],
    d_model: int,
    hidden: int = DEFAULT_HIDDEN,
    rng: np.random.Generator = None,
) -> DacHead:
    """Randomly initialized head; with no rng every weight is zero."""
    shapes = {
        "W1": (hidden, d_model),
        "b1": (hidden,),
        "W2": (len(groups), hidden),
        "b2": (len(groups),),
    }
    params = {}
    for name, shape in shapes.items():
        if rng is None or name.startswith("b"):
            params[name] = Tensor(np.zeros(shape))
        else:
            params[name] = Tensor(
                rng.normal(scale=1.0 / math.sqrt(shape[1]), size=shape)
            )
    return DacHead(attribute=attribute, groups=tuple(groups), params=params)


def init_heads(
    schema: AttributeSchema, d_model: int, hidden: int = DEFAULT_HIDDEN, seed: int = 0
) -> Dict[str, DacHead]:
    """One head per schema attribute, drawn from a single seeded stream."""
    rng = np.random.default_rng(seed)
    return {
        name: init_head(name, schema.groups[name], d_model, hidden, rng)
        for name in schema.attributes
    }


def dac_logits(head: DacHead, h: Tensor) -> Tensor:
    """Unnormalized group scores for one or more pooled states."""
    if h.shape[-1] != head.d_model:
        raise ShapeError("dac_forward", h.shape, head.params["W1"].shape)
    p = head.params
    hidden = gelu(add(matmul(h, transpose(p["W1"])), p["b1"]))
    return add(matmul(hidden, transpose(p["W2"])), p["b2"])


def dac_forward(head: DacHead, h: Tensor) -> Tensor:
    """φ_a(· | h): softmax over the head's groups."""
    return softmax(dac_logits(head, h))


def dac_log_probs(head: DacHead, h: Tensor) -> Tensor:
    """log φ_a(· | h) with probabilities floored at 1e-12."""
    return log(dac_forward(head, h))


def class_weights(schema: AttributeSchema, name: str) -> np.ndarray:
    """1 / frequency per group, normalized to mean 1 over the groups."""
    counts = np.array(schema.frequency_vector(name), dtype=np.float64)
    if not schema.frequencies.get(name):
        logging.debug(f"No frequencies for {name}; using uniform class weights")
        return np.ones(len(counts))
    if np.any(counts == 0):
        empty = [g for g, c in zip(schema.groups[name], counts) if c == 0]
        raise DataError(
            f"Attribute {name} has empty groups {empty}; cannot weight classes"
        )
    inverse = 1.0 / counts
    return inverse / inverse.mean()


def check_labels(labels, n_groups: int, name: str) -> np.ndarray:
    """Validate group indices of one attribute."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_groups):
        raise DataError(f"Label outside the {n_groups} groups of {name}")
    return labels


def weighted_nll(log_probs: Tensor, labels, weights) -> Tensor:
    """-(1/B) sum_i w[a_i] log q(a_i | h_i)."""
    batch, n_groups = log_probs.shape
    labels = check_labels(labels, n_groups, "weighted_nll")
    selector = np.zeros((batch, n_groups))
    weights = np.asarray(weights, dtype=np.float64)
    selector[np.arange(batch), labels] = weights[labels] / batch
    return scale(sum(mul(log_probs, constant(selector))), -1.0)


def dac_loss(head: DacHead, h: Tensor, labels, weights=None) -> Tensor:
    """
    Class-weighted cross-entropy of one head.

    h is detached first, so no gradient reaches the decoder.
    """
    log_probs = dac_log_probs(head, detach(h))
    if weights is None:
        weights = np.ones(len(head.groups))
    return weighted_nll(log_probs, labels, weights)


def dac_losses(
    heads: Mapping[str, DacHead],
    h: Tensor,
    labels: Mapping[str, np.ndarray],
    schema: AttributeSchema,
) -> Dict[str, Tensor]:
    """dac_loss for every schema attribute."""
    missing = [name for name in schema.attributes if name not in labels]
    if missing:
        raise DataError(f"Batch has no labels for attributes {missing}")
    return {
        name: dac_loss(heads[name], h, labels[name], class_weights(schema, name))
        for name in schema.attributes
    }
