"""Text metrics, per-group fairness summaries and their uncertainty."""

from .analysis import (
    CounterfactualResult,
    CrossSectionalResult,
    counterfactual_gap,
    cross_sectional_gaps,
)
from .bootstrap import BootstrapResult, bootstrap_ci
from .fairness_report import (
    FairnessReport,
    GroupScore,
    build_report,
    es_metric,
    fairness_gap,
    group_scores,
)
from .pairs import METRICS, ScoredPair, read_predictions, score_pairs, write_predictions
from .text import bleu_n, diagnosis_accuracy, rouge_l

__all__ = [
    "BootstrapResult",
    "CounterfactualResult",
    "CrossSectionalResult",
    "FairnessReport",
    "GroupScore",
    "METRICS",
    "ScoredPair",
    "bleu_n",
    "bootstrap_ci",
    "build_report",
    "counterfactual_gap",
    "cross_sectional_gaps",
    "diagnosis_accuracy",
    "es_metric",
    "fairness_gap",
    "group_scores",
    "read_predictions",
    "rouge_l",
    "score_pairs",
    "write_predictions",
]
