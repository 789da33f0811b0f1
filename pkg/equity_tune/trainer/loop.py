"""
Alternating optimization of the attribute heads and the decoder adapters.

Each step runs one decoder forward pass on the model tape, then

1. updates every head on the DAC cross-entropy of the detached pooled states,
2. re-enters the model tape, evaluates the DIM penalty under the updated and
   frozen heads, and updates the projector and adapters on
   lambda_lm * L_LM + lambda_dim * L_DIM.

The frozen decoder weights are never watched, so they never change.
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence

import attr
import numpy as np

from ..data.records import Batch, Dataset
from ..fairness.club import dim_losses
from ..fairness.dac import DacHead, dac_losses, init_heads
from ..fairness.schema import AttributeSchema, LossWeights
from ..fairness.total import combine_losses
from ..model.config import ModelConfig
from ..model.decoder import (
    ModelState,
    forward_batch,
    init_state,
    pool_prompt,
    sequence_nll,
)
from ..numerics import Tape, backward, detach
from ..util.common import write_jsonl
from ..util.exceptions import DataError, NumericError
from .baselines import resample_indices, reweight_factors
from .config import TrainConfig
from .optim import make_optimizer


@attr.s(auto_attribs=True)
class StepRecord:
    """One optimizer step."""

    step: int
    epoch: int
    phase: str
    lm: float = 0.0
    dim: Dict[str, float] = attr.Factory(dict)
    dac: Dict[str, float] = attr.Factory(dict)
    total: float = 0.0
    grad_norms: Dict[str, float] = attr.Factory(dict)
    diverged: bool = False
    diverged_terms: List[str] = attr.Factory(list)
    message: Optional[str] = None


@attr.s(auto_attribs=True)
class TrainLog:
    """Step and epoch records in the order they were produced."""

    header: dict = attr.Factory(dict)
    records: List[dict] = attr.Factory(list)

    @property
    def steps(self) -> List[dict]:
        """Only the step records."""
        return [r for r in self.records if r["type"] == "step"]

    def add_step(self, record: StepRecord):
        """Append a step record."""
        self.records.append(dict(type="step", **attr.asdict(record)))

    def add_epoch(self, epoch: int, phase: str, records: Sequence[StepRecord]):
        """Append an epoch summary with mean losses of its finite steps."""
        finite = [r for r in records if not r.diverged]
        summary = {
            "type": "epoch",
            "epoch": epoch,
            "phase": phase,
            "n_steps": len(records),
            "n_diverged": len(records) - len(finite),
            "mean_lm": float(np.mean([r.lm for r in finite])) if finite else None,
            "mean_total": float(np.mean([r.total for r in finite])) if finite else None,
        }
        self.records.append(summary)
        logging.info(
            f"Epoch {epoch} ({phase}): {summary['n_steps']} steps, "
            f"mean LM {summary['mean_lm']}, mean total {summary['mean_total']}"
        )

    def write(self, path):
        """Write the header line followed by every record as JSONL."""
        write_jsonl(path, [dict(type="header", **self.header)] + self.records)


@attr.s(auto_attribs=True, frozen=True)
class TrainResult:
    """Final parameters and the log of a run."""

    state: ModelState
    heads: Dict[str, DacHead]
    log: TrainLog
    schema: AttributeSchema


def _norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g ** 2)) for g in grads.values())))


def train_step(
    state: ModelState,
    heads: Dict[str, DacHead],
    batch: Batch,
    schema: AttributeSchema,
    weights: LossWeights,
    model_optimizer,
    head_optimizer,
    multipliers: Optional[Sequence[float]] = None,
    update_model: bool = True,
    update_heads: bool = True,
    trainable: Optional[Sequence[str]] = None,
    step: int = 0,
    epoch: int = 0,
    phase: str = "joint",
):
    """
    One alternating update; returns (state, heads, StepRecord).

    ``trainable`` restricts the model update to the named projector/adapter
    parameters. A non-finite value anywhere aborts the step: the inputs are
    returned unchanged and the record is marked diverged.
    """
    record = StepRecord(step=step, epoch=epoch, phase=phase)
    if weights.lambda_dim > 0 and update_model and len(batch) < 2:
        raise DataError("The DIM penalty needs minibatches of at least 2 samples")
    term = "lm"
    try:
        model_tape = Tape()
        params = state.trainable()
        if trainable is not None:
            params = {name: params[name] for name in trainable}
        with model_tape:
            for tensor in params.values():
                model_tape.watch(tensor)
            prefixes = [r[:-1] for r in batch.references]
            output = forward_batch(state, batch.features, prefixes)
            lm, _ = sequence_nll(output, batch.references, multipliers)
            h = pool_prompt(state, output)
        record.lm = lm.item()

        term = "dac"
        new_heads = heads
        if weights.lambda_dac > 0:
            head_params = {}
            for head in heads.values():
                head_params.update(head.named_params())
            with Tape() as head_tape:
                if update_heads:
                    for tensor in head_params.values():
                        head_tape.watch(tensor)
                dac = dac_losses(heads, detach(h), batch.labels, schema)
                dac_total, _ = combine_losses(None, {}, dac, weights)
            record.dac = {name: t.item() for name, t in dac.items()}
            if update_heads and head_tape.tracks(dac_total):
                grads = backward(head_tape, dac_total)
                grad_arrays = {
                    name: grads[t.ref].data for name, t in head_params.items()
                }
                record.grad_norms["phi"] = _norm(grad_arrays)
                updated = head_optimizer.step(head_params, grad_arrays)
                new_heads = {
                    name: head.with_params(updated) for name, head in heads.items()
                }

        term = "dim"
        model_weights = (
            attr.evolve(weights, lambda_dac=0.0)
            if weights.lambda_lm > 0 or weights.lambda_dim > 0
            else None
        )
        new_state = state
        if model_weights is not None:
            with model_tape:
                dim = (
                    dim_losses(new_heads, h, batch.labels, schema)
                    if weights.lambda_dim > 0
                    else {}
                )
                model_total, _ = combine_losses(lm, dim, {}, model_weights)
            record.dim = {name: t.item() for name, t in dim.items()}
            if update_model and model_tape.tracks(model_total):
                grads = backward(model_tape, model_total)
                grad_arrays = {name: grads[t.ref].data for name, t in params.items()}
                projector = {
                    k: g for k, g in grad_arrays.items() if k.startswith("projector.")
                }
                record.grad_norms["theta"] = _norm(
                    {k: g for k, g in grad_arrays.items() if k not in projector}
                )
                record.grad_norms["psi"] = _norm(projector)
                new_state = state.with_trainable(
                    model_optimizer.step(params, grad_arrays)
                )

        dim_sum = sum(weights.weight(a) * v for a, v in record.dim.items())
        dac_sum = sum(weights.weight(a) * v for a, v in record.dac.items())
        record.total = (
            weights.lambda_lm * record.lm
            + weights.lambda_dim * dim_sum
            + weights.lambda_dac * dac_sum
        )
    except NumericError as e:
        logging.warning(f"Step {step} diverged in {term}: {e}")
        record.diverged = True
        record.diverged_terms = [term]
        record.message = str(e)
        return state, heads, record
    return new_state, new_heads, record


def _batches(order: np.ndarray, batch_size: int, min_size: int) -> List[np.ndarray]:
    batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    if batches and len(batches[-1]) < min_size:
        batches = batches[:-1]
    return batches


def train_run(
    config: TrainConfig,
    dataset: Dataset,
    model_config: ModelConfig,
    header: Optional[dict] = None,
) -> TrainResult:
    """
    Train adapters, projector and heads on a dataset.

    The run is a pure function of (config, model_config, dataset): every
    random draw comes from generators seeded by ``config.seed``.
    """
    dataset.validate()
    schema = dataset.schema.with_frequencies(s.attributes for s in dataset.samples)
    features = dataset.features()
    if features.shape[1] != model_config.feature_dim:
        raise DataError(
            f"Dataset features have width {features.shape[1]}, "
            f"model expects {model_config.feature_dim}"
        )
    labels = {name: dataset.group_indices(name) for name in schema.attributes}
    dataset = attr.evolve(dataset, schema=schema)

    state = init_state(model_config, seed=config.seed)
    heads = init_heads(
        schema, model_config.d_model, config.dac_hidden, seed=config.seed + 1
    )
    log = TrainLog(header=header or {})
    if config.epochs == 0:
        return TrainResult(state=state, heads=heads, log=log, schema=schema)

    baseline_attributes = list(config.baseline_attributes) or list(schema.attributes)
    multipliers = np.ones(len(dataset))
    if config.baseline == "reweight":
        multipliers = reweight_factors(schema, labels, baseline_attributes)
    if config.lm_reduction == "token_mean":
        mean_tokens = np.mean([len(s.reference) for s in dataset.samples])
        multipliers = multipliers / (config.batch_size * mean_tokens)

    rng = np.random.default_rng(config.seed)
    weights = config.weights
    min_size = 2 if weights.lambda_dim > 0 else 1
    step = 0

    def run_epochs(
        n_epochs, phase, state, heads, step_kwargs, model_optimizer, head_optimizer
    ):
        nonlocal step
        for epoch in range(n_epochs):
            if config.baseline == "resample":
                order = resample_indices(
                    schema,
                    labels,
                    baseline_attributes[0],
                    seed=config.seed + step + epoch,
                )
            else:
                order = np.arange(len(dataset))
            order = rng.permutation(order)
            records = []
            for indices in _batches(order, config.batch_size, min_size):
                state, heads, record = train_step(
                    state,
                    heads,
                    dataset.batch(indices),
                    schema,
                    step_kwargs["weights"],
                    model_optimizer,
                    head_optimizer,
                    multipliers=multipliers[indices],
                    update_model=step_kwargs["update_model"],
                    update_heads=step_kwargs["update_heads"],
                    trainable=step_kwargs.get("trainable"),
                    step=step,
                    epoch=epoch,
                    phase=phase,
                )
                log.add_step(record)
                records.append(record)
                step += 1
            log.add_epoch(epoch, phase, records)
        return state, heads

    if config.stage1_epochs:
        projector_only = sorted(state.projector)
        state, heads = run_epochs(
            config.stage1_epochs,
            "stage1",
            state,
            heads,
            dict(
                weights=LossWeights(lambda_lm=1.0, lambda_dim=0.0, lambda_dac=0.0),
                update_model=True,
                update_heads=False,
                trainable=projector_only,
            ),
            make_optimizer(config.optimizer, config.learning_rate),
            None,
        )

    model_optimizer = make_optimizer(config.optimizer, config.learning_rate)
    head_optimizer = make_optimizer(config.optimizer, config.learning_rate)
    if config.schedule == "joint":
        state, heads = run_epochs(
            config.epochs,
            "joint",
            state,
            heads,
            dict(weights=weights, update_model=True, update_heads=True),
            model_optimizer,
            head_optimizer,
        )
    else:
        pretrain_weight = weights.lambda_dac if weights.lambda_dac > 0 else 1.0
        state, heads = run_epochs(
            config.dac_pretrain_epochs,
            "dac_pretrain",
            state,
            heads,
            dict(
                weights=LossWeights(
                    lambda_lm=0.0,
                    lambda_dim=0.0,
                    lambda_dac=pretrain_weight,
                    attribute_weights=weights.attribute_weights,
                ),
                update_model=False,
                update_heads=True,
            ),
            model_optimizer,
            head_optimizer,
        )
        if weights.lambda_lm > 0 or weights.lambda_dim > 0:
            state, heads = run_epochs(
                config.epochs,
                "frozen_dac",
                state,
                heads,
                dict(
                    weights=attr.evolve(weights, lambda_dac=0.0),
                    update_model=True,
                    update_heads=False,
                ),
                model_optimizer,
                head_optimizer,
            )
    return TrainResult(state=state, heads=heads, log=log, schema=schema)
