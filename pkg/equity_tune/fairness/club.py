"""
Contrastive log-ratio upper bound on I(h; a).

``dim_loss`` is the batch estimator minimized with respect to the decoder:
the mean log-likelihood of matched (h_i, a_i) pairs minus the mean over all
B(B-1) mismatched pairs (h_j, a_i). The head's parameters are frozen inside
it. ``club_bound_exact`` and ``exact_mutual_information`` evaluate the same
quantities by enumeration over a finite joint distribution.
"""

import builtins
import math
from typing import Mapping

import numpy as np

from ..numerics import LOG_FLOOR, Tensor, constant, matmul, mul, sum, transpose
from ..util.exceptions import DataError, NumericError
from .dac import DacHead, check_labels, dac_log_probs
from .schema import AttributeSchema

TOLERANCE = 1e-9


def club_batch_estimate(log_probs: Tensor, labels) -> Tensor:
    """
    Batch CLUB estimate from a (B, groups) matrix of log q(. | h_i).

    S[i, j] = log q(a_j | h_i); the result is mean(diag S) minus the mean of
    the off-diagonal entries.
    """
    batch, n_groups = log_probs.shape
    if batch < 2:
        raise DataError(
            f"The negative-pair term needs a batch of at least 2, got {batch}"
        )
    labels = check_labels(labels, n_groups, "dim_loss")
    one_hot = np.zeros((batch, n_groups))
    one_hot[np.arange(batch), labels] = 1.0
    pair_scores = matmul(log_probs, transpose(constant(one_hot)))
    eye = np.eye(batch)
    weights = eye / batch - (1.0 - eye) / (batch * (batch - 1))
    return sum(mul(pair_scores, constant(weights)))


def dim_loss(head: DacHead, h: Tensor, labels) -> Tensor:
    """Batch CLUB estimate with the head frozen; gradients flow only into h."""
    return club_batch_estimate(dac_log_probs(head.detached(), h), labels)


def dim_losses(
    heads: Mapping[str, DacHead],
    h: Tensor,
    labels: Mapping[str, np.ndarray],
    schema: AttributeSchema,
):
    """dim_loss for every schema attribute."""
    missing = [name for name in schema.attributes if name not in labels]
    if missing:
        raise DataError(f"Batch has no labels for attributes {missing}")
    return {name: dim_loss(heads[name], h, labels[name]) for name in schema.attributes}


def _validate_joint(joint: np.ndarray):
    if joint.ndim != 2:
        raise ValueError(f"Joint must be a 2-d table, got shape {joint.shape}")
    if np.any(joint < 0) or abs(joint.sum() - 1.0) > TOLERANCE:
        raise ValueError("Joint entries must be non-negative and sum to 1")


def club_bound_exact(joint, q) -> float:
    """
    E_p(h,a)[log q(a|h)] - E_p(h)p(a)[log q(a|h)] by enumeration.

    Rows of ``joint`` and ``q`` index h-cells, columns index groups. q is
    floored at 1e-12 only inside the product-of-marginals term.
    """
    joint = np.asarray(joint, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    _validate_joint(joint)
    if q.shape != joint.shape:
        raise ValueError(
            f"Conditional shape {q.shape} does not match joint {joint.shape}"
        )
    if np.any(q < 0) or np.any(np.abs(q.sum(axis=1) - 1.0) > TOLERANCE):
        raise ValueError("Every row of q must be a probability vector")
    support = joint > 0
    if np.any(q[support] == 0):
        raise NumericError("q assigns zero probability where the joint has mass")

    positive = float(np.sum(joint[support] * np.log(q[support])))
    marginals = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    negative = float(np.sum(marginals * np.log(np.maximum(q, LOG_FLOOR))))
    return positive - negative


def exact_mutual_information(joint) -> float:
    """
    Sum over cells of p log(p / (p_h p_a)), skipping zero cells.

    Entries may be ``fractions.Fraction``; the ratios are then exact, so
    independent joints give exactly 0.
    """
    rows = [list(row) for row in joint]
    row_marginals = [builtins.sum(row) for row in rows]
    column_marginals = [builtins.sum(column) for column in zip(*rows)]
    # normalize by the total so rational joints need not sum to exactly 1
    total = builtins.sum(row_marginals)
    information = 0.0
    for i, row in enumerate(rows):
        for j, p in enumerate(row):
            if p > 0:
                ratio = p * total / (row_marginals[i] * column_marginals[j])
                information += float(p / total) * math.log(float(ratio))
    return information


def conditional_from_joint(joint) -> np.ndarray:
    """q(a | h) = p(h, a) / p(h); rows with no mass become uniform."""
    joint = np.asarray(joint, dtype=np.float64)
    row_mass = joint.sum(axis=1, keepdims=True)
    uniform = np.full_like(joint, 1.0 / joint.shape[1])
    has_mass = row_mass > 0
    return np.where(has_mass, joint / np.where(has_mass, row_mass, 1.0), uniform)


def club_bound_single_draw(joint, q, n_samples: int, seed: int = 0) -> float:
    """
    Monte Carlo bound with one independent negative per positive pair.

    Each draw takes (h, a) from the joint and h' from the h-marginal and
    scores log q(a|h) - log q(a|h').
    """
    joint = np.asarray(joint, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    _validate_joint(joint)
    rng = np.random.default_rng(seed)
    cells = rng.choice(joint.size, size=n_samples, p=joint.reshape(-1))
    h_cells, groups = np.unravel_index(cells, joint.shape)
    negatives = rng.choice(joint.shape[0], size=n_samples, p=joint.sum(axis=1))
    log_q = np.log(np.maximum(q, LOG_FLOOR))
    return float(np.mean(log_q[h_cells, groups] - log_q[negatives, groups]))
