"""Percentile bootstrap for per-group scores, fairness gaps and ES values."""

import logging
from typing import Dict, Optional, Sequence, Tuple

import attr
import numpy as np

PERCENTILES = (2.5, 50.0, 97.5)
DEFAULT_RESAMPLES = 1000

Interval = Tuple[float, float, float]


@attr.s(auto_attribs=True, frozen=True)
class BootstrapResult:
    """(lower, median, upper) triples and the number of skipped resamples."""

    groups: Dict[str, Optional[Interval]]
    gap: Optional[Interval]
    es: Optional[Interval]
    n_resamples: int
    skipped: int

    @property
    def skip_rate(self) -> float:
        """Fraction of resamples whose gap could not be computed."""
        return self.skipped / self.n_resamples


def interval(values: Sequence[float]) -> Optional[Interval]:
    """2.5th, 50th and 97.5th percentiles, or None without values."""
    if len(values) == 0:
        return None
    values = np.asarray(values, dtype=np.float64)
    lower, median, upper = np.percentile(values, PERCENTILES)
    return float(lower), float(median), float(upper)


def bootstrap_ci(
    scores: Sequence[float],
    groups: Sequence[str],
    included: Sequence[str],
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    m_all_mode: str = "sample",
    reported: Optional[Sequence[str]] = None,
) -> BootstrapResult:
    """
    Resample pairs with replacement and recompute the statistics.

    Resample r draws ``rng.integers(0, n, size=n)`` from
    ``np.random.default_rng(seed)``. Per-group intervals cover ``included``
    plus ``reported`` and use only the resamples in which the group is
    present. A resample in which any included group is empty is skipped (and
    counted) for the gap and ES.
    """
    if n_resamples < 1:
        raise ValueError(f"n_resamples must be >= 1, got {n_resamples}")
    if m_all_mode not in ("sample", "group"):
        raise ValueError(f"Unknown m_all_mode {m_all_mode}")
    reported = list(dict.fromkeys([*included, *(reported or [])]))
    scores = np.asarray(scores, dtype=np.float64)
    groups = np.asarray(groups)
    n = len(scores)
    rng = np.random.default_rng(seed)

    per_group = {g: [] for g in reported}
    gaps, es_values = [], []
    skipped = 0
    for _ in range(n_resamples):
        index = rng.integers(0, n, size=n)
        sample_scores, sample_groups = scores[index], groups[index]
        means = {}
        for g in reported:
            selected = sample_scores[sample_groups == g]
            if selected.size:
                means[g] = selected.mean()
                per_group[g].append(means[g])
        present = [g for g in included if g in means]
        if len(present) < len(included) or len(included) < 2:
            skipped += 1
            continue
        gap = max(means[g] for g in included) - min(means[g] for g in included)
        if m_all_mode == "sample":
            m_all = sample_scores.mean()
        else:
            m_all = np.mean([means[g] for g in included])
        gaps.append(gap)
        es_values.append(m_all / (1.0 + gap))

    if skipped:
        logging.info(
            f"Skipped {skipped} of {n_resamples} bootstrap resamples with empty groups"
        )
    return BootstrapResult(
        groups={g: interval(v) for g, v in per_group.items()},
        gap=interval(gaps),
        es=interval(es_values),
        n_resamples=n_resamples,
        skipped=skipped,
    )
