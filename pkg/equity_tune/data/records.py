"""Samples, datasets and dataset manifests."""

from collections import Counter
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import attr
import cattr
import numpy as np

from ..fairness.schema import AttributeSchema
from ..util.common import read_json, read_jsonl, write_json, write_jsonl
from ..util.exceptions import DataError


@attr.s(auto_attribs=True, frozen=True)
class Sample:
    """One feature vector with its demographic labels and reference tokens."""

    id: str
    features: List[float]
    attributes: Dict[str, str]
    reference: List[int] = attr.ib()
    labels: List[int] = attr.Factory(list)
    split: Optional[str] = None

    @reference.validator
    def validate_reference(self, attribute, value):
        """References need at least one token."""
        if not value:
            raise ValueError(f"Sample {self.id} has an empty reference.")


@attr.s(auto_attribs=True, frozen=True)
class Batch:
    """Arrays for one minibatch; labels hold group indices per attribute."""

    ids: List[str]
    features: np.ndarray
    references: List[List[int]]
    labels: Dict[str, np.ndarray]

    def __len__(self):
        """Number of samples."""
        return len(self.ids)


@attr.s(auto_attribs=True, frozen=True)
class Dataset:
    """An immutable list of samples under one attribute schema."""

    schema: AttributeSchema
    samples: List[Sample]

    def __len__(self):
        """Number of samples."""
        return len(self.samples)

    def features(self) -> np.ndarray:
        """(N, d) feature matrix."""
        return np.array([s.features for s in self.samples], dtype=np.float64)

    def group_indices(self, name: str) -> np.ndarray:
        """Group index of every sample for one attribute."""
        return np.array(
            [self.schema.group_index(name, s.attributes[name]) for s in self.samples],
            dtype=np.int64,
        )

    def batch(self, indices: Sequence[int]) -> Batch:
        """Gather samples into arrays."""
        chosen = [self.samples[i] for i in indices]
        return Batch(
            ids=[s.id for s in chosen],
            features=np.array([s.features for s in chosen], dtype=np.float64),
            references=[list(s.reference) for s in chosen],
            labels={
                name: np.array(
                    [self.schema.group_index(name, s.attributes[name]) for s in chosen],
                    dtype=np.int64,
                )
                for name in self.schema.attributes
            },
        )

    def subset(self, indices: Sequence[int], split: Optional[str] = None) -> "Dataset":
        """Samples at the given positions, optionally re-tagged with a split."""
        chosen = [self.samples[i] for i in indices]
        if split is not None:
            chosen = [attr.evolve(s, split=split) for s in chosen]
        return Dataset(schema=self.schema, samples=chosen)

    def validate(self):
        """Check that every sample carries a known label for every attribute."""
        if not self.samples:
            raise DataError("Dataset is empty")
        for sample in self.samples:
            for name in self.schema.attributes:
                if name not in sample.attributes:
                    raise DataError(f"Sample {sample.id} has no label for {name}")
                self.schema.group_index(name, sample.attributes[name])

    def write(self, path):
        """Write one JSON object per sample."""
        write_jsonl(path, (cattr.unstructure(s) for s in self.samples))

    @classmethod
    def read(cls, path, schema: AttributeSchema) -> "Dataset":
        """Read a file written by ``write``; use ``ingest_jsonl`` for outside data."""
        samples = []
        for line_number, row in read_jsonl(path):
            try:
                samples.append(cattr.structure(row, Sample))
            except Exception as e:  # cattrs wraps field errors in its own group type
                raise DataError(f"{path}:{line_number}: invalid sample ({e})")
        return cls(schema=schema, samples=samples)


@attr.s(auto_attribs=True, frozen=True)
class DatasetManifest:
    """Schema, counts and provenance of a dataset file."""

    schema: AttributeSchema
    n_samples: int
    group_counts: Dict[str, Dict[str, int]]
    cell_counts: Dict[str, Dict[str, Dict[str, int]]]
    config_hash: str
    config: dict = attr.Factory(dict)
    true_mi: Optional[Dict[str, float]] = None
    lexicon: Dict[str, int] = attr.Factory(dict)

    @classmethod
    def from_dataset(
        cls, dataset: Dataset, config_hash: str, **kwargs
    ) -> "DatasetManifest":
        """Count groups and group x finding cells."""
        group_counts, cell_counts = count_cells(dataset)
        labels = (s.attributes for s in dataset.samples)
        return cls(
            schema=dataset.schema.with_frequencies(labels),
            n_samples=len(dataset),
            group_counts=group_counts,
            cell_counts=cell_counts,
            config_hash=config_hash,
            **kwargs,
        )

    def write(self, path):
        """Write the manifest as a JSON sidecar."""
        write_json(path, cattr.unstructure(self))

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        """Read a JSON sidecar."""
        if not Path(path).is_file():
            raise DataError(f"Manifest {path} does not exist")
        try:
            return cattr.structure(read_json(path), cls)
        except Exception as e:
            raise DataError(f"Invalid manifest {path} ({e})")


def count_cells(dataset: Dataset):
    """Per-group counts and per group x finding-label counts for every attribute."""
    group_counts = {}
    cell_counts = {}
    for name in dataset.schema.attributes:
        groups = Counter(s.attributes[name] for s in dataset.samples)
        group_counts[name] = {g: groups.get(g, 0) for g in dataset.schema.groups[name]}
        cells: Dict[str, Counter] = {g: Counter() for g in dataset.schema.groups[name]}
        for sample in dataset.samples:
            for label in sample.labels:
                cells[sample.attributes[name]][str(label)] += 1
        cell_counts[name] = {g: dict(sorted(c.items())) for g, c in cells.items()}
    return group_counts, cell_counts
