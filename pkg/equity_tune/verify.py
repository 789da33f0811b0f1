"""
Self-checks run by the command line.

``gradient_suite`` compares tape gradients of every loss term with central
differences on small seeded problems and confirms the two stop-gradient
contracts. ``club_oracle_suite`` checks that the exact CLUB bound is never
below the exact mutual information on random enumerable joints.
"""

import logging
from typing import Dict, List, Sequence

import attr
import numpy as np

from .fairness.club import (
    club_bound_exact,
    conditional_from_joint,
    dim_losses,
    exact_mutual_information,
)
from .fairness.dac import DacHead, dac_losses, init_heads
from .fairness.schema import AttributeSchema, LossWeights
from .fairness.total import combine_losses, total_loss
from .model.config import EOS, FIRST_CONTENT_TOKEN, ModelConfig
from .model.decoder import (
    ModelState,
    forward_batch,
    init_state,
    lm_loss,
    pool_prompt,
    sequence_nll,
)
from .numerics import Tape, Tensor, backward, grad_check

GRAD_TOLERANCE = 1e-4
MI_TOLERANCE = 1e-12
TERMS = ("lm", "dac", "dim", "total")
WORKED_JOINT = [[0.4, 0.1], [0.1, 0.4]]


@attr.s(auto_attribs=True, frozen=True)
class ToyProblem:
    """A seeded model state, heads and batch small enough for finite differences."""

    state: ModelState
    heads: Dict[str, DacHead]
    schema: AttributeSchema
    weights: LossWeights
    features: np.ndarray
    references: List[List[int]]
    labels: Dict[str, np.ndarray]


def toy_problem(seed: int, batch_size: int = 2) -> ToyProblem:
    """Two-layer decoder with random nonzero adapters and two attributes."""
    config = ModelConfig(
        n_layers=2,
        d_model=8,
        n_heads=2,
        vocab_size=12,
        max_seq=12,
        feature_dim=4,
        n_feature_tokens=2,
        lora_rank=2,
        pooling_mode="mean",
        mlp_ratio=2,
        backbone_seed=seed,
    )
    rng = np.random.default_rng(seed)
    state = init_state(config, seed=seed)
    state = state.with_trainable(
        {
            name: Tensor(rng.normal(scale=0.1, size=t.shape))
            for name, t in state.adapters.items()
            if name.endswith(".B")
        }
    )
    schema = AttributeSchema(
        attributes=["gender", "age"],
        groups={"gender": ["female", "male"], "age": ["young", "middle", "old"]},
    )
    references = [
        [
            int(t)
            for t in rng.integers(FIRST_CONTENT_TOKEN, config.vocab_size, size=length)
        ]
        + [EOS]
        for length in rng.integers(1, 4, size=batch_size)
    ]
    return ToyProblem(
        state=state,
        heads=init_heads(schema, config.d_model, hidden=6, seed=seed),
        schema=schema,
        weights=LossWeights(
            lambda_lm=1.0,
            lambda_dim=0.5,
            lambda_dac=0.7,
            attribute_weights={"gender": 1.0, "age": 0.5},
        ),
        features=rng.normal(size=(batch_size, config.feature_dim)),
        references=references,
        labels={
            "gender": rng.integers(0, 2, size=batch_size),
            "age": rng.integers(0, 3, size=batch_size),
        },
    )


def _pooled(problem: ToyProblem, state: ModelState) -> Tensor:
    prefixes = [r[:-1] for r in problem.references]
    return pool_prompt(state, forward_batch(state, problem.features, prefixes))


def _heads_from(problem: ToyProblem, named: Dict[str, Tensor]) -> Dict[str, DacHead]:
    return {name: head.with_params(named) for name, head in problem.heads.items()}


def _head_params(problem: ToyProblem) -> Dict[str, Tensor]:
    params = {}
    for head in problem.heads.values():
        params.update(head.named_params())
    return params


def term_checks(
    problem: ToyProblem, coordinates: int = 3, seed: int = 0
) -> Dict[str, float]:
    """Max relative gradient error of each loss term."""
    state, weights = problem.state, problem.weights
    model_names = sorted(state.trainable())
    head_names = sorted(_head_params(problem))
    model_params = [state.trainable()[n] for n in model_names]
    head_params = [_head_params(problem)[n] for n in head_names]
    h_base = _pooled(problem, state)

    def with_model(ts):
        return state.with_trainable(dict(zip(model_names, ts)))

    def lm(ts):
        return lm_loss(with_model(ts), problem.features, problem.references)[0]

    def dac(ts):
        heads = _heads_from(problem, dict(zip(head_names, ts)))
        losses = dac_losses(heads, h_base, problem.labels, problem.schema)
        return combine_losses(None, {}, losses, weights)[0]

    def dim(ts):
        h = _pooled(problem, with_model(ts))
        losses = dim_losses(problem.heads, h, problem.labels, problem.schema)
        return combine_losses(None, losses, {}, weights)[0]

    n_model = len(model_names)

    def total(ts):
        heads = _heads_from(problem, dict(zip(head_names, ts[n_model:])))
        return total_loss(
            with_model(ts[:n_model]),
            heads,
            problem.features,
            problem.references,
            problem.labels,
            problem.schema,
            weights,
        )[0]

    def total_held(ts):
        # DIM sees the base heads and DAC the base pooled states
        model = with_model(ts[:n_model])
        heads = _heads_from(problem, dict(zip(head_names, ts[n_model:])))
        prefixes = [r[:-1] for r in problem.references]
        output = forward_batch(model, problem.features, prefixes)
        lm_term, _ = sequence_nll(output, problem.references)
        h = pool_prompt(model, output)
        dim_terms = dim_losses(problem.heads, h, problem.labels, problem.schema)
        dac_terms = dac_losses(heads, h_base, problem.labels, problem.schema)
        return combine_losses(lm_term, dim_terms, dac_terms, weights)[0]

    check = dict(coordinates=coordinates, seed=seed)
    return {
        "lm": grad_check(lm, model_params, **check),
        "dac": grad_check(dac, head_params, **check),
        "dim": grad_check(dim, model_params, **check),
        "total": grad_check(
            total, model_params + head_params, numeric_f=total_held, **check
        ),
    }


def stop_gradient_checks(problem: ToyProblem) -> Dict[str, float]:
    """Largest gradient that leaks through each stop-gradient; both must be 0."""
    state = problem.state
    results = {}
    for term in ("dim_wrt_heads", "dac_wrt_model"):
        with Tape() as tape:
            model = {n: tape.watch(t) for n, t in state.trainable().items()}
            heads_named = {n: tape.watch(t) for n, t in _head_params(problem).items()}
            heads = _heads_from(problem, heads_named)
            h = _pooled(problem, state.with_trainable(model))
            if term == "dim_wrt_heads":
                losses = dim_losses(heads, h, problem.labels, problem.schema)
                root, _ = combine_losses(None, losses, {}, problem.weights)
                leaked = heads_named
            else:
                losses = dac_losses(heads, h, problem.labels, problem.schema)
                root, _ = combine_losses(None, {}, losses, problem.weights)
                leaked = model
        grads = backward(tape, root)
        results[term] = max(
            float(np.max(np.abs(grads[t.ref].data))) for t in leaked.values()
        )
    return results


def gradient_suite(
    seeds: Sequence[int] = range(10),
    tolerance: float = GRAD_TOLERANCE,
    coordinates: int = 3,
) -> List[dict]:
    """One row per seed and term, plus one per stop-gradient contract."""
    rows = []
    for seed in seeds:
        problem = toy_problem(seed)
        errors = term_checks(problem, coordinates=coordinates, seed=seed)
        for term, error in errors.items():
            rows.append(
                {
                    "seed": seed,
                    "term": term,
                    "max_relative_error": error,
                    "ok": error <= tolerance,
                }
            )
        for term, leaked in stop_gradient_checks(problem).items():
            rows.append(
                {
                    "seed": seed,
                    "term": term,
                    "max_abs_gradient": leaked,
                    "ok": leaked == 0.0,
                }
            )
        logging.info(f"Gradient checks for seed {seed} done")
    return rows


def random_joint(rng: np.random.Generator, max_size: int = 8) -> np.ndarray:
    """A random joint table with 2..max_size rows and columns and some empty cells."""
    rows, columns = rng.integers(2, max_size + 1, size=2)
    joint = rng.random((rows, columns)) * (rng.random((rows, columns)) > 0.2)
    if joint.sum() == 0:
        joint[0, 0] = 1.0
    return joint / joint.sum()


def club_oracle_suite(
    n_joints: int = 100, seed: int = 0, tolerance: float = MI_TOLERANCE
) -> List[dict]:
    """Exact bound vs exact MI, the worked 2x2 joint first."""
    rng = np.random.default_rng(seed)
    joints = [np.array(WORKED_JOINT)] + [random_joint(rng) for _ in range(n_joints)]
    rows = []
    for index, joint in enumerate(joints):
        bound = club_bound_exact(joint, conditional_from_joint(joint))
        mi = exact_mutual_information(joint)
        rows.append(
            {
                "joint": index,
                "shape": f"{joint.shape[0]}x{joint.shape[1]}",
                "bound": bound,
                "mutual_information": mi,
                "slack": bound - mi,
                "ok": bound - mi >= -tolerance,
            }
        )
    return rows
