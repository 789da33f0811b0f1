"""Toy frozen decoder with a trainable projector and low-rank adapters."""

from .config import EOS, INSTRUCTION, PAD, ModelConfig
from .decoder import (
    ForwardOutput,
    ModelState,
    adapted_matmul,
    forward_batch,
    forward_decode,
    frozen_checksum,
    generate,
    generate_batch,
    init_state,
    lm_loss,
    pool_hidden,
    pool_prompt,
    pooled_states,
    project_features,
    sequence_nll,
)

__all__ = [
    "EOS",
    "INSTRUCTION",
    "PAD",
    "ForwardOutput",
    "ModelConfig",
    "ModelState",
    "adapted_matmul",
    "forward_batch",
    "forward_decode",
    "frozen_checksum",
    "generate",
    "generate_batch",
    "init_state",
    "lm_loss",
    "pool_hidden",
    "pool_prompt",
    "pooled_states",
    "project_features",
    "sequence_nll",
]
