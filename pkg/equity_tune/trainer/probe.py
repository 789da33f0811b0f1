"""Held-out attribute probes on frozen pooled hidden states."""

import logging
from typing import Dict, Mapping

import attr
import numpy as np

from ..fairness.dac import dac_log_probs, dac_logits, init_head, weighted_nll
from ..fairness.schema import AttributeSchema
from ..model.decoder import ModelState, pooled_states
from ..numerics import Tape, Tensor, backward, constant
from ..util.exceptions import DataError
from .optim import Adam

STD_FLOOR = 1e-8


@attr.s(auto_attribs=True, frozen=True)
class ProbeResult:
    """Held-out accuracy of one attribute probe with its reference rates."""

    attribute: str
    accuracy: float
    chance: float
    majority_rate: float
    n_train: int
    n_test: int


def _standardize(train: np.ndarray, test: np.ndarray):
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return (train - mean) / std, (test - mean) / std


def probe_leakage(
    h_train: np.ndarray,
    labels_train: Mapping[str, np.ndarray],
    h_test: np.ndarray,
    labels_test: Mapping[str, np.ndarray],
    schema: AttributeSchema,
    hidden: int = 32,
    epochs: int = 200,
    learning_rate: float = 0.01,
    seed: int = 0,
) -> Dict[str, ProbeResult]:
    """
    Train a fresh head per attribute on train states, score it on test states.

    Training is full-batch Adam on standardized inputs with unweighted
    cross-entropy.
    """
    if len(h_train) == 0 or len(h_test) == 0:
        raise DataError("Probing needs non-empty train and test splits")
    x_train, x_test = _standardize(np.asarray(h_train), np.asarray(h_test))
    results = {}
    for offset, name in enumerate(schema.attributes):
        y_train = np.asarray(labels_train[name], dtype=np.int64)
        y_test = np.asarray(labels_test[name], dtype=np.int64)
        if len(np.unique(y_train)) < 2:
            raise DataError(f"Train split has a single class for {name}; cannot probe")

        rng = np.random.default_rng(seed + offset)
        head = init_head(name, schema.groups[name], x_train.shape[1], hidden, rng)
        optimizer = Adam(learning_rate)
        features = constant(x_train)
        ones = np.ones(len(head.groups))
        for _ in range(epochs):
            with Tape() as tape:
                for t in head.params.values():
                    tape.watch(t)
                loss = weighted_nll(dac_log_probs(head, features), y_train, ones)
            grads = backward(tape, loss)
            params = dict(head.params)
            grad_arrays = {k: grads[t.ref].data for k, t in params.items()}
            updated = optimizer.step(params, grad_arrays)
            head = attr.evolve(head, params=updated)

        predictions = np.argmax(dac_logits(head, Tensor(x_test)).data, axis=1)
        majority = np.bincount(y_train, minlength=len(head.groups)).argmax()
        result = ProbeResult(
            attribute=name,
            accuracy=float(np.mean(predictions == y_test)),
            chance=1.0 / len(head.groups),
            majority_rate=float(np.mean(y_test == majority)),
            n_train=len(y_train),
            n_test=len(y_test),
        )
        logging.info(
            f"Probe {name}: accuracy {result.accuracy:.3f} "
            f"(chance {result.chance:.3f}, majority {result.majority_rate:.3f})"
        )
        results[name] = result
    return results


def pooled_in_batches(
    state: ModelState, features: np.ndarray, batch_size: int = 256
) -> np.ndarray:
    """h(x) for many feature vectors, computed batch by batch."""
    chunks = [
        pooled_states(state, features[start : start + batch_size]).data
        for start in range(0, len(features), batch_size)
    ]
    return np.concatenate(chunks, axis=0)


def probe_model(state: ModelState, train, test, **kwargs) -> Dict[str, ProbeResult]:
    """probe_leakage on the pooled states of two datasets."""
    h_train = pooled_in_batches(state, train.features())
    h_test = pooled_in_batches(state, test.features())
    labels_train = {name: train.group_indices(name) for name in train.schema.attributes}
    labels_test = {name: test.group_indices(name) for name in test.schema.attributes}
    return probe_leakage(
        h_train, labels_train, h_test, labels_test, train.schema, **kwargs
    )
