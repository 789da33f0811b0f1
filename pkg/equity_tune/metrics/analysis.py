"""Gaps that control for correlated attributes and for sample content."""

import logging
from typing import Dict, List, Sequence

import attr
import numpy as np

from ..util.exceptions import CoverageError, DataError
from .fairness_report import MIN_COUNT, pairs_frame
from .pairs import ScoredPair

DEFAULT_THRESHOLD = 0.7


@attr.s(auto_attribs=True, frozen=True)
class SliceGap:
    """Target-attribute gap inside one joint value of the control attributes."""

    slice: Dict[str, str]
    gap: float
    size: int
    groups: Dict[str, float]


@attr.s(auto_attribs=True, frozen=True)
class CrossSectionalResult:
    """Per-slice gaps and their size-weighted mean."""

    target: str
    controls: List[str]
    slices: List[SliceGap]
    aggregate: float
    skipped: List[Dict[str, str]] = attr.Factory(list)


def cross_sectional_gaps(
    pairs: Sequence[ScoredPair],
    scores: Sequence[float],
    target: str,
    controls: Sequence[str],
    min_count: int = MIN_COUNT,
) -> CrossSectionalResult:
    """
    Target gap within every slice of the control attributes.

    A slice counts only when at least two target groups inside it reach
    ``min_count`` pairs. The aggregate weights each slice by its pair count.
    """
    controls = [c for c in controls if c != target]
    frame = pairs_frame(pairs, scores)
    for column in [target] + controls:
        if column not in frame.columns or frame[column].isna().any():
            raise DataError(f"Every pair needs a label for attribute {column}")

    if controls:
        partitions = [
            (key if isinstance(key, tuple) else (key,), part)
            for key, part in frame.groupby(controls, sort=True)
        ]
    else:
        partitions = [((), frame)]

    slices, skipped = [], []
    for key, part in partitions:
        labels = dict(zip(controls, key))
        stats = part.groupby(target)["score"].agg(["mean", "count"])
        stats = stats[stats["count"] >= min_count]
        if len(stats) < 2:
            skipped.append(labels)
            continue
        slices.append(
            SliceGap(
                slice=labels,
                gap=float(stats["mean"].max() - stats["mean"].min()),
                size=len(part),
                groups={str(g): float(m) for g, m in stats["mean"].items()},
            )
        )
    if not slices:
        raise DataError(
            f"No slice of {controls} has two {target} groups "
            f"with at least {min_count} pairs"
        )
    if skipped:
        logging.info(
            f"Skipped {len(skipped)} slices without two populated {target} groups"
        )
    sizes = np.array([s.size for s in slices], dtype=np.float64)
    gaps = np.array([s.gap for s in slices])
    return CrossSectionalResult(
        target=target,
        controls=list(controls),
        slices=slices,
        aggregate=float(np.sum(sizes * gaps) / np.sum(sizes)),
        skipped=skipped,
    )


@attr.s(auto_attribs=True, frozen=True)
class Match:
    """A pair and its nearest admissible counterpart."""

    source: str
    target: str
    similarity: float
    difference: float


@attr.s(auto_attribs=True, frozen=True)
class CounterfactualResult:
    """Matched-pair gap with its coverage."""

    attribute: str
    threshold: float
    gap: float
    n_pairs: int
    n_matched: int
    matches: List[Match] = attr.Factory(list)

    @property
    def coverage(self) -> float:
        """Fraction of pairs that found a match."""
        return self.n_matched / self.n_pairs

    @property
    def unmatched(self) -> float:
        """Fraction of pairs without a match."""
        return 1.0 - self.coverage


def cosine_similarities(latents: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity; zero vectors are dissimilar to everything."""
    norms = np.linalg.norm(latents, axis=1, keepdims=True)
    unit = np.divide(latents, norms, out=np.zeros_like(latents), where=norms > 0)
    return unit @ unit.T


def counterfactual_gap(
    pairs: Sequence[ScoredPair],
    scores: Sequence[float],
    attribute: str,
    threshold: float = DEFAULT_THRESHOLD,
) -> CounterfactualResult:
    """
    Mean absolute score difference over cross-group nearest neighbours.

    Each pair is matched to the most similar pair of a different group with
    the same task label set and cosine similarity at least ``threshold``;
    ties go to the lowest index.
    """
    if not pairs:
        raise DataError("No pairs to match")
    if any(p.latent is None or p.labels is None for p in pairs):
        raise DataError(
            "Counterfactual matching needs a latent and a label set on every pair"
        )
    if any(attribute not in p.attributes for p in pairs):
        raise DataError(f"Every pair needs a label for attribute {attribute}")
    latents = np.array([p.latent for p in pairs], dtype=np.float64)
    if latents.ndim != 2:
        raise DataError("Latents must all have the same length")
    scores = np.asarray(scores, dtype=np.float64)
    groups = np.array([p.attributes[attribute] for p in pairs])
    label_sets = [frozenset(p.labels) for p in pairs]
    similarity = cosine_similarities(latents)

    matches: List[Match] = []
    for i, pair in enumerate(pairs):
        admissible = (groups != groups[i]) & (similarity[i] >= threshold)
        admissible &= np.array([s == label_sets[i] for s in label_sets])
        if not admissible.any():
            continue
        j = int(np.argmax(np.where(admissible, similarity[i], -np.inf)))
        matches.append(
            Match(
                source=pair.id,
                target=pairs[j].id,
                similarity=float(similarity[i, j]),
                difference=float(abs(scores[i] - scores[j])),
            )
        )

    coverage = {
        "n_pairs": len(pairs),
        "n_matched": len(matches),
        "threshold": threshold,
    }
    CoverageError.raise_if_empty(matches, coverage)
    gap = float(np.mean([m.difference for m in matches]))
    logging.info(
        f"Matched {len(matches)} of {len(pairs)} pairs on {attribute} "
        f"(gap {gap:.4f})"
    )
    return CounterfactualResult(
        attribute=attribute,
        threshold=threshold,
        gap=gap,
        n_pairs=len(pairs),
        n_matched=len(matches),
        matches=matches,
    )
