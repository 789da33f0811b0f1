"""Configuration of the toy frozen decoder and its trainable parts."""

import math
from typing import List, Optional, Tuple

import attr

POOLING_MODES = ("first", "mid", "last", "mean", "custom")
TOKEN_POOLING = ("mean", "last")

PAD = 0
EOS = 1
INSTRUCTION = (2, 3, 4, 5)
FIRST_CONTENT_TOKEN = 6


def _positive(instance, attribute, value):
    if value < 1:
        raise ValueError(f"{attribute.name} must be >= 1, got {value}.")


@attr.s(auto_attribs=True, frozen=True)
class ModelConfig:
    """
    Shape of the frozen decoder, projector, adapters and layer taps.

    Uses attrs to simplify the class definition and provide validation.
    Docs: https://www.attrs.org
    """

    n_layers: int = attr.ib(4, validator=_positive)
    d_model: int = attr.ib(64, validator=_positive)
    n_heads: int = attr.ib(4, validator=_positive)
    vocab_size: int = attr.ib(64)
    max_seq: int = attr.ib(48, validator=_positive)
    feature_dim: int = attr.ib(16, validator=_positive)
    n_feature_tokens: int = attr.ib(4, validator=_positive)
    lora_rank: int = attr.ib(4, validator=_positive)
    lora_scale: float = attr.ib(1.0)
    pooling_mode: str = attr.ib("mid")
    tapped_layers: Optional[List[int]] = attr.ib(None)
    token_pooling: str = attr.ib("mean")
    mlp_ratio: int = attr.ib(2, validator=_positive)
    backbone_seed: int = attr.ib(0)

    @d_model.validator
    def validate_heads(self, attribute, value):
        """Check that the model width splits evenly over heads."""
        if value % self.n_heads != 0:
            raise ValueError(
                f"d_model ({value}) must be divisible by n_heads ({self.n_heads})."
            )

    @vocab_size.validator
    def validate_vocab(self, attribute, value):
        """Check that the vocabulary holds the special tokens."""
        if value <= FIRST_CONTENT_TOKEN:
            raise ValueError(
                f"vocab_size must exceed {FIRST_CONTENT_TOKEN} to hold special tokens."
            )

    @pooling_mode.validator
    def validate_pooling_mode(self, attribute, value):
        """Check the layer pooling preset."""
        if value not in POOLING_MODES:
            raise ValueError(
                f"Invalid pooling_mode {value}; use one of {POOLING_MODES}."
            )

    @token_pooling.validator
    def validate_token_pooling(self, attribute, value):
        """Check the within-layer token aggregation."""
        if value not in TOKEN_POOLING:
            raise ValueError(
                f"Invalid token_pooling {value}; use one of {TOKEN_POOLING}."
            )

    @tapped_layers.validator
    def validate_tapped_layers(self, attribute, value):
        """Check that custom taps are a non-empty subset of 1..n_layers."""
        if self.pooling_mode == "custom" and not value:
            raise ValueError(
                "pooling_mode custom needs a non-empty tapped_layers list."
            )
        for layer in value or []:
            if not 1 <= layer <= self.n_layers:
                raise ValueError(
                    f"Tapped layer {layer} outside 1..{self.n_layers}."
                )

    @property
    def head_dim(self) -> int:
        """Width of one attention head."""
        return self.d_model // self.n_heads

    @property
    def middle_layer(self) -> int:
        """ceil(n_layers / 2), the middle of the stack."""
        return math.ceil(self.n_layers / 2)

    def tapped(self) -> Tuple[int, ...]:
        """Resolve the pooling preset to a sorted tuple of 1-based layer indices."""
        if self.pooling_mode == "first":
            layers = {1}
        elif self.pooling_mode == "mid":
            layers = {self.middle_layer}
        elif self.pooling_mode == "last":
            layers = {self.n_layers}
        elif self.pooling_mode == "mean":
            layers = {1, self.middle_layer, self.n_layers}
        else:
            layers = set(self.tapped_layers)
        return tuple(sorted(layers))
