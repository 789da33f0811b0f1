"""Synthetic data generation, ingestion and splitting."""

from .ingest import ingest_jsonl
from .oracle import true_mi_oracle
from .records import Batch, Dataset, DatasetManifest, Sample
from .split import split_dataset
from .synth import AttributeSpec, SynthConfig, synth_generate, template_distribution

__all__ = [
    "AttributeSpec",
    "Batch",
    "Dataset",
    "DatasetManifest",
    "Sample",
    "SynthConfig",
    "ingest_jsonl",
    "split_dataset",
    "synth_generate",
    "template_distribution",
    "true_mi_oracle",
]
