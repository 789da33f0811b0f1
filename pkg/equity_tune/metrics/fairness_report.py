"""Per-group scores, fairness gaps and equity-scaled metrics."""

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Union

import attr
import numpy as np
import pandas as pd

from ..util.exceptions import DataError
from .bootstrap import DEFAULT_RESAMPLES, BootstrapResult, bootstrap_ci
from .pairs import ScoredPair, score_pairs

MIN_COUNT = 10
M_ALL_MODES = ("sample", "group")


@attr.s(auto_attribs=True, frozen=True)
class GroupScore:
    """Mean metric of one demographic group."""

    group: str
    mean: float
    count: int
    flagged: bool = False


def pairs_frame(pairs: Sequence[ScoredPair], scores: Sequence[float]) -> pd.DataFrame:
    """One row per pair: id, score and one column per attribute."""
    if len(pairs) != len(scores):
        raise DataError(f"Got {len(scores)} scores for {len(pairs)} pairs")
    rows = []
    for pair, score in zip(pairs, scores):
        row = dict(pair.attributes)
        row["id"] = pair.id
        row["score"] = float(score)
        rows.append(row)
    return pd.DataFrame(rows)


def _check_labels(frame: pd.DataFrame, attribute: str, groups: Optional[Sequence[str]]):
    if attribute not in frame.columns or frame[attribute].isna().any():
        raise DataError(f"Every pair needs a label for attribute {attribute}")
    if groups is not None:
        unknown = sorted(set(frame[attribute]) - set(groups))
        if unknown:
            raise DataError(
                f"Unknown {attribute} groups: {unknown}; "
                f"expected one of {list(groups)}"
            )


def group_scores(
    pairs: Sequence[ScoredPair],
    metric: str,
    attribute: str,
    groups: Optional[Sequence[str]] = None,
    lexicon: Optional[Mapping[str, int]] = None,
    min_count: int = MIN_COUNT,
    scores: Optional[Sequence[float]] = None,
) -> Dict[str, GroupScore]:
    """
    Mean per-pair score within each group of an attribute.

    Groups with fewer than ``min_count`` pairs are flagged but still
    reported. Groups are ordered as in ``groups`` when given, otherwise by
    name; groups without any pair are omitted.
    """
    if scores is None:
        scores = score_pairs(pairs, metric, lexicon)
    frame = pairs_frame(pairs, scores)
    _check_labels(frame, attribute, groups)
    stats = frame.groupby(attribute)["score"].agg(["mean", "count"])
    if groups is not None:
        order = [g for g in groups if g in stats.index]
    else:
        order = sorted(stats.index)
    return {
        g: GroupScore(
            group=g,
            mean=float(stats.loc[g, "mean"]),
            count=int(stats.loc[g, "count"]),
            flagged=int(stats.loc[g, "count"]) < min_count,
        )
        for g in order
    }


def included_groups(scores: Mapping[str, Union[GroupScore, float]]) -> Dict[str, float]:
    """Means of the groups that are not flagged."""
    means = {}
    for name, score in scores.items():
        if isinstance(score, GroupScore):
            if not score.flagged:
                means[name] = score.mean
        else:
            means[name] = float(score)
    return means


def fairness_gap(scores: Mapping[str, Union[GroupScore, float]]) -> float:
    """Max minus min over the included group means."""
    means = included_groups(scores)
    if len(means) < 2:
        raise DataError(
            "A fairness gap needs at least 2 groups above the minimum count, "
            f"got {sorted(means)}"
        )
    return max(means.values()) - min(means.values())


def es_metric(m_all: float, gap: float) -> float:
    """Equity-scaled metric: the overall metric divided by one plus the gap."""
    if gap < 0:
        raise ValueError(f"Fairness gap must be non-negative, got {gap}")
    return m_all / (1.0 + gap)


@attr.s(auto_attribs=True, frozen=True)
class FairnessReport:
    """
    Fairness summary of one metric over one attribute, in percent.

    Uses attrs to simplify the class definition and provide validation.
    Docs: https://www.attrs.org
    """

    metric: str
    attribute: str
    groups: Dict[str, GroupScore]
    m_all: float
    gap: float = attr.ib()
    es: float
    m_all_mode: str = attr.ib("sample")
    n_pairs: int = 0
    excluded: List[str] = attr.Factory(list)
    ci: Optional[dict] = None

    @gap.validator
    def validate_gap(self, attribute, value):
        """Gaps are never negative."""
        if value < 0:
            raise ValueError(f"Invalid fairness gap {value}.")

    @m_all_mode.validator
    def validate_m_all_mode(self, attribute, value):
        """Check the overall-mean mode."""
        if value not in M_ALL_MODES:
            raise ValueError(
                f"Invalid m_all_mode {value}; expected one of {M_ALL_MODES}."
            )


def _ci_document(result: BootstrapResult) -> dict:
    return {
        "groups": {g: list(v) if v else None for g, v in result.groups.items()},
        "gap": list(result.gap) if result.gap else None,
        "es": list(result.es) if result.es else None,
        "n_resamples": result.n_resamples,
        "skipped": result.skipped,
        "skip_rate": result.skip_rate,
    }


def build_report(
    pairs: Sequence[ScoredPair],
    metric: str,
    attribute: str,
    groups: Optional[Sequence[str]] = None,
    lexicon: Optional[Mapping[str, int]] = None,
    min_count: int = MIN_COUNT,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    m_all_mode: str = "sample",
) -> FairnessReport:
    """
    Score pairs and summarize one attribute.

    Scores are scaled to percent before the gap and ES are taken, so the
    gap and the overall metric share units. ``n_resamples=0`` skips the
    bootstrap.
    """
    if m_all_mode not in M_ALL_MODES:
        raise ValueError(
            f"Invalid m_all_mode {m_all_mode}; expected one of {M_ALL_MODES}."
        )
    scores = 100.0 * score_pairs(pairs, metric, lexicon)
    per_group = group_scores(
        pairs, metric, attribute, groups=groups, min_count=min_count, scores=scores
    )
    included = included_groups(per_group)
    gap = fairness_gap(per_group)
    if m_all_mode == "sample":
        m_all = float(np.mean(scores))
    else:
        m_all = float(np.mean(list(included.values())))

    ci = None
    if n_resamples:
        result = bootstrap_ci(
            scores,
            [p.attributes[attribute] for p in pairs],
            list(included),
            n_resamples=n_resamples,
            seed=seed,
            m_all_mode=m_all_mode,
            reported=list(per_group),
        )
        ci = _ci_document(result)

    excluded = [g for g, s in per_group.items() if s.flagged]
    if excluded:
        logging.info(
            f"{metric}/{attribute}: groups below {min_count} pairs "
            f"excluded: {excluded}"
        )
    return FairnessReport(
        metric=metric,
        attribute=attribute,
        groups=per_group,
        m_all=m_all,
        gap=gap,
        es=es_metric(m_all, gap),
        m_all_mode=m_all_mode,
        n_pairs=len(pairs),
        excluded=excluded,
        ci=ci,
    )
