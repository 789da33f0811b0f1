"""Attribute classifiers, the CLUB-style information penalty and the total objective."""

from .club import (
    club_batch_estimate,
    club_bound_exact,
    club_bound_single_draw,
    conditional_from_joint,
    dim_loss,
    dim_losses,
    exact_mutual_information,
)
from .dac import (
    DacHead,
    class_weights,
    dac_forward,
    dac_log_probs,
    dac_loss,
    dac_losses,
    init_head,
    init_heads,
    weighted_nll,
)
from .schema import AttributeSchema, LossWeights

__all__ = [
    "AttributeSchema",
    "DacHead",
    "LossWeights",
    "class_weights",
    "club_batch_estimate",
    "club_bound_exact",
    "club_bound_single_draw",
    "conditional_from_joint",
    "dac_forward",
    "dac_log_probs",
    "dac_loss",
    "dac_losses",
    "dim_loss",
    "dim_losses",
    "exact_mutual_information",
    "init_head",
    "init_heads",
    "weighted_nll",
]
