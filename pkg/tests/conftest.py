"""Shared fixtures: a tiny decoder and a tiny synthetic dataset."""

import pytest

from equity_tune.data.synth import SynthConfig, synth_generate
from equity_tune.model.config import ModelConfig


@pytest.fixture
def model_config():
    """Two-layer decoder that holds the default synthetic vocabulary."""
    return ModelConfig(
        n_layers=2,
        d_model=8,
        n_heads=2,
        vocab_size=40,
        max_seq=20,
        feature_dim=16,
        n_feature_tokens=2,
        lora_rank=2,
        pooling_mode="mean",
    )


@pytest.fixture
def synth_config():
    """Default attributes, few samples."""
    return SynthConfig(n_samples=60, feature_dim=16, seed=3)


@pytest.fixture
def dataset(synth_config):
    """Samples drawn from synth_config."""
    dataset, _ = synth_generate(synth_config)
    return dataset
