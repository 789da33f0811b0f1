"""Alternating fairness-aware training, rebalancing baselines and leakage probes."""

from .baselines import resample_indices, reweight_factors
from .config import TrainConfig
from .loop import StepRecord, TrainLog, TrainResult, train_run, train_step
from .optim import Adam, Sgd, make_optimizer
from .probe import ProbeResult, probe_leakage, probe_model

__all__ = [
    "Adam",
    "ProbeResult",
    "Sgd",
    "StepRecord",
    "TrainConfig",
    "TrainLog",
    "TrainResult",
    "make_optimizer",
    "probe_leakage",
    "probe_model",
    "resample_indices",
    "reweight_factors",
    "train_run",
    "train_step",
]
