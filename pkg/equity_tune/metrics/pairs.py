"""Generated/reference pairs and the per-pair metric registry."""

from typing import Callable, Dict, List, Mapping, Optional, Sequence

import attr
import cattr
import numpy as np

from ..util.common import read_jsonl, write_jsonl
from ..util.exceptions import DataError
from .text import bleu_n, diagnosis_correct, rouge_l


@attr.s(auto_attribs=True, frozen=True)
class ScoredPair:
    """A generation with its reference, demographic labels and optional latent."""

    id: str
    generated: List[int]
    reference: List[int] = attr.ib()
    attributes: Dict[str, str]
    latent: Optional[List[float]] = None
    labels: Optional[List[int]] = None

    @reference.validator
    def validate_reference(self, attribute, value):
        """References need at least one token."""
        if not value:
            raise ValueError(f"Pair {self.id} has an empty reference.")


def _bleu(n):
    def score(pair: ScoredPair, lexicon) -> float:
        return bleu_n(pair.generated, pair.reference, n)

    return score


def _rouge(pair: ScoredPair, lexicon) -> float:
    return rouge_l(pair.generated, pair.reference)


def _diagnosis(pair: ScoredPair, lexicon) -> float:
    if pair.labels is None:
        raise DataError(f"Pair {pair.id} has no task labels for diagnosis scoring")
    return diagnosis_correct(pair.generated, pair.labels, lexicon)


METRICS: Dict[str, Callable[[ScoredPair, Mapping[str, int]], float]] = {
    "bleu1": _bleu(1),
    "bleu4": _bleu(4),
    "rougeL": _rouge,
    "diagnosis": _diagnosis,
}


def score_pairs(
    pairs: Sequence[ScoredPair],
    metric: str,
    lexicon: Optional[Mapping[str, int]] = None,
) -> np.ndarray:
    """Per-pair scores in [0, 1], in pair order."""
    if metric not in METRICS:
        raise DataError(f"Unknown metric {metric}; available: {sorted(METRICS)}")
    scores = [METRICS[metric](p, lexicon or {}) for p in pairs]
    return np.array(scores, dtype=np.float64)


def write_predictions(path, pairs: Sequence[ScoredPair]):
    """One JSON object per pair, in the given order."""
    write_jsonl(path, (cattr.unstructure(p) for p in pairs))


def read_predictions(path) -> List[ScoredPair]:
    """Read a predictions file."""
    pairs = []
    for line_number, row in read_jsonl(path):
        try:
            pairs.append(cattr.structure(row, ScoredPair))
        except Exception as e:
            raise DataError(f"{path}:{line_number}: invalid prediction ({e})")
    if not pairs:
        raise DataError(f"{path} contains no predictions")
    return pairs
