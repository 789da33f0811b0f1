"""Stratified train/test splitting."""

from collections import defaultdict
from typing import Tuple

import numpy as np

from .records import Dataset


def split_dataset(
    dataset: Dataset, train_fraction: float, seed: int = 0
) -> Tuple[Dataset, Dataset]:
    """
    Split by joint attribute cell.

    Cells are visited in sorted order and each contributes
    ``fraction * size`` samples to train, with the fractional remainder
    carried into the next cell so the overall train size is the rounded
    target. Members of each cell are shuffled with a seeded generator.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    cells = defaultdict(list)
    for index, sample in enumerate(dataset.samples):
        key = tuple(sample.attributes[name] for name in dataset.schema.attributes)
        cells[key].append(index)

    rng = np.random.default_rng(seed)
    train, test = [], []
    carry = 0.0
    for key in sorted(cells):
        members = cells[key]
        order = rng.permutation(len(members))
        exact = train_fraction * len(members) + carry
        n_train = int(np.floor(exact + 0.5))
        n_train = min(max(n_train, 0), len(members))
        carry = exact - n_train
        train.extend(members[i] for i in order[:n_train])
        test.extend(members[i] for i in order[n_train:])

    return (
        dataset.subset(sorted(train), split="train"),
        dataset.subset(sorted(test), split="test"),
    )
