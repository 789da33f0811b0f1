"""Training configuration."""

from typing import List, Optional

import attr

from ..fairness.schema import LossWeights

OPTIMIZERS = ("adam", "sgd")
SCHEDULES = ("joint", "pretrain-dac-then-freeze")
BASELINES = ("none", "reweight", "resample")
LM_REDUCTIONS = ("sum", "token_mean")


def _non_negative_int(instance, attribute, value):
    if value < 0:
        raise ValueError(f"{attribute.name} must be >= 0, got {value}.")


def _one_of(choices):
    def validate(instance, attribute, value):
        if value not in choices:
            raise ValueError(f"Invalid {attribute.name} {value}; use one of {choices}.")

    return validate


@attr.s(auto_attribs=True, frozen=True)
class TrainConfig:
    """
    Optimization settings for one training run.

    Uses attrs to simplify the class definition and provide validation.
    Docs: https://www.attrs.org
    """

    epochs: int = attr.ib(3, validator=_non_negative_int)
    batch_size: int = attr.ib(16)
    learning_rate: float = attr.ib(1e-2)
    optimizer: str = attr.ib("adam", validator=_one_of(OPTIMIZERS))
    seed: int = 0
    schedule: str = attr.ib("joint", validator=_one_of(SCHEDULES))
    baseline: str = attr.ib("none", validator=_one_of(BASELINES))
    baseline_attributes: List[str] = attr.Factory(list)
    weights: LossWeights = attr.Factory(LossWeights)
    dac_pretrain_epochs: int = attr.ib(3, validator=_non_negative_int)
    stage1_epochs: int = attr.ib(1, validator=_non_negative_int)
    dac_hidden: int = attr.ib(32)
    lm_reduction: str = attr.ib("sum", validator=_one_of(LM_REDUCTIONS))
    checkpoint_path: Optional[str] = None
    log_path: Optional[str] = None

    @batch_size.validator
    def validate_batch_size(self, attribute, value):
        """The negative-pair term needs two samples per batch."""
        if value < 1:
            raise ValueError(f"batch_size must be >= 1, got {value}.")
        if value < 2 and self.weights.lambda_dim > 0:
            raise ValueError("batch_size must be >= 2 when lambda_dim > 0.")

    @learning_rate.validator
    def validate_learning_rate(self, attribute, value):
        """Learning rate is non-negative."""
        if value < 0:
            raise ValueError(f"learning_rate must be >= 0, got {value}.")

    @dac_hidden.validator
    def validate_dac_hidden(self, attribute, value):
        """Hidden width of the attribute heads."""
        if value < 1:
            raise ValueError(f"dac_hidden must be >= 1, got {value}.")
