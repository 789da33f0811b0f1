"""Classical rebalancing baselines: loss reweighting and group resampling."""

from typing import Mapping, Sequence

import numpy as np

from ..fairness.schema import AttributeSchema
from ..util.exceptions import DataError


def _group_counts(schema: AttributeSchema, name: str, labels: np.ndarray) -> np.ndarray:
    counts = np.bincount(labels, minlength=schema.n_groups(name))
    if np.any(counts == 0):
        empty = [g for g, c in zip(schema.groups[name], counts) if c == 0]
        raise DataError(f"Attribute {name} has empty groups {empty}")
    return counts


def reweight_factors(
    schema: AttributeSchema,
    labels: Mapping[str, np.ndarray],
    attributes: Sequence[str],
) -> np.ndarray:
    """
    Per-sample loss multipliers inversely proportional to group frequency.

    The raw multiplier is the product over attributes of
    N / (n_groups * count(group)); the result is rescaled to mean 1.
    """
    if not attributes:
        raise ValueError("reweight_factors needs at least one attribute")
    n = len(labels[attributes[0]])
    if n == 0:
        raise DataError("Cannot reweight an empty dataset")
    raw = np.ones(n)
    for name in attributes:
        group = np.asarray(labels[name], dtype=np.int64)
        counts = _group_counts(schema, name, group)
        raw *= n / (schema.n_groups(name) * counts[group])
    return raw / raw.mean()


def resample_indices(
    schema: AttributeSchema,
    labels: Mapping[str, np.ndarray],
    attribute: str,
    seed: int = 0,
) -> np.ndarray:
    """
    N indices drawn so that every group of one attribute appears equally often.

    Group k receives N // K draws, plus one for the first N % K groups,
    sampled uniformly with replacement from its members. The result is
    shuffled.
    """
    if attribute not in schema.groups:
        raise DataError(
            f"Unknown attribute {attribute}; schema has {schema.attributes}"
        )
    group = np.asarray(labels[attribute], dtype=np.int64)
    _group_counts(schema, attribute, group)
    n, k = len(group), schema.n_groups(attribute)
    rng = np.random.default_rng(seed)
    chosen = []
    for index in range(k):
        members = np.flatnonzero(group == index)
        target = n // k + (1 if index < n % k else 0)
        chosen.append(rng.choice(members, size=target, replace=True))
    return rng.permutation(np.concatenate(chosen))
