import numpy as np
import pytest

from equity_tune.metrics.analysis import (
    cosine_similarities,
    counterfactual_gap,
    cross_sectional_gaps,
)
from equity_tune.metrics.fairness_report import fairness_gap, group_scores
from equity_tune.metrics.pairs import ScoredPair
from equity_tune.util.exceptions import CoverageError, DataError


def _pair(i, gender, race="w", latent=None, labels=None):
    return ScoredPair(
        id=f"p{i:03d}",
        generated=[6],
        reference=[6],
        attributes={"gender": gender, "race": race},
        latent=latent,
        labels=labels,
    )


class TestCrossSectionalGaps:
    def test_weighted_aggregate(self):
        pairs, scores = [], []
        for race, n, value in (("w", 30, 0.2), ("y", 10, 0.6)):
            for k in range(n):
                gender = "a" if k % 2 == 0 else "b"
                pairs.append(_pair(len(pairs), gender, race))
                scores.append(value if gender == "a" else 0.0)
        result = cross_sectional_gaps(pairs, scores, "gender", ["race"], min_count=5)
        assert [s.slice for s in result.slices] == [{"race": "w"}, {"race": "y"}]
        assert [s.size for s in result.slices] == [30, 10]
        assert [s.gap for s in result.slices] == pytest.approx([0.2, 0.6])
        assert result.aggregate == pytest.approx(0.3)

    def test_no_controls_is_plain_gap(self):
        rng = np.random.default_rng(0)
        labels = rng.choice(["a", "b", "c"], size=40)
        pairs = [_pair(i, g) for i, g in enumerate(labels)]
        scores = rng.random(40)
        result = cross_sectional_gaps(pairs, scores, "gender", [], min_count=1)
        plain = fairness_gap(
            group_scores(pairs, "bleu1", "gender", min_count=1, scores=scores)
        )
        assert result.aggregate == pytest.approx(plain)
        assert len(result.slices) == 1 and result.slices[0].slice == {}

    def test_thin_slices_skipped(self):
        pairs = [_pair(i, "a" if i % 2 else "b", "w") for i in range(20)]
        pairs += [_pair(20 + i, "a", "y") for i in range(10)]
        result = cross_sectional_gaps(
            pairs, [1.0] * 30, "gender", ["race", "gender"], min_count=5
        )
        assert result.controls == ["race"]
        assert result.skipped == [{"race": "y"}]
        assert result.aggregate == 0.0

    def test_nothing_populated(self):
        pairs = [_pair(i, "a", "w") for i in range(10)]
        with pytest.raises(DataError):
            cross_sectional_gaps(pairs, [1.0] * 10, "gender", ["race"], min_count=1)


def _brute_force_matches(pairs, scores, similarity, threshold):
    matches = []
    for i, pair in enumerate(pairs):
        best = None
        for j, other in enumerate(pairs):
            if other.attributes["gender"] == pair.attributes["gender"]:
                continue
            if set(other.labels) != set(pair.labels) or similarity[i][j] < threshold:
                continue
            if best is None or similarity[i][j] > similarity[i][best]:
                best = j
        if best is not None:
            matches.append((pair.id, pairs[best].id, abs(scores[i] - scores[best])))
    return matches


class TestCounterfactualGap:
    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(0)
        pairs = [
            _pair(
                i,
                str(rng.choice(["a", "b", "c"])),
                latent=list(rng.normal(size=4) + [2.0, 0.0, 0.0, 0.0]),
                labels=[
                    int(c)
                    for c in rng.choice(2, size=int(rng.integers(1, 3)), replace=False)
                ],
            )
            for i in range(200)
        ]
        scores = rng.random(200)
        result = counterfactual_gap(pairs, scores, "gender", threshold=0.7)
        similarity = cosine_similarities(np.array([p.latent for p in pairs]))
        expected = _brute_force_matches(pairs, scores, similarity, 0.7)
        assert [(m.source, m.target, m.difference) for m in result.matches] == expected
        assert result.gap == pytest.approx(np.mean([d for _, _, d in expected]))
        assert result.coverage == len(expected) / 200
        assert result.unmatched == pytest.approx(1 - result.coverage)

    def test_identical_counterparts(self):
        pairs = [
            _pair(0, "a", latent=[1.0, 0.0], labels=[1]),
            _pair(1, "b", latent=[1.0, 0.0], labels=[1]),
            _pair(2, "a", latent=[0.0, 2.0], labels=[0]),
            _pair(3, "b", latent=[0.0, 3.0], labels=[0]),
        ]
        result = counterfactual_gap(pairs, [0.4, 0.4, 0.9, 0.9], "gender")
        assert result.gap == 0.0
        assert result.coverage == 1.0
        assert [m.target for m in result.matches] == ["p001", "p000", "p003", "p002"]

    def test_label_sets_must_agree(self):
        pairs = [
            _pair(0, "a", latent=[1.0], labels=[1]),
            _pair(1, "b", latent=[1.0], labels=[1, 2]),
        ]
        with pytest.raises(CoverageError):
            counterfactual_gap(pairs, [0.0, 1.0], "gender")

    def test_threshold_above_one(self):
        pairs = [
            _pair(0, "a", latent=[1.0, 0.0], labels=[1]),
            _pair(1, "b", latent=[1.0, 0.0], labels=[1]),
        ]
        with pytest.raises(CoverageError) as e:
            counterfactual_gap(pairs, [0.0, 1.0], "gender", threshold=1.1)
        assert e.value.coverage["n_matched"] == 0

    def test_needs_latents(self):
        with pytest.raises(DataError):
            counterfactual_gap([_pair(0, "a", labels=[1])], [0.0], "gender")

    def test_cosine_similarities(self):
        latents = np.array([[3.0, 4.0], [4.0, -3.0], [0.0, 0.0], [6.0, 8.0]])
        similarity = cosine_similarities(latents)
        assert similarity[0, 1] == pytest.approx(0.0)
        assert similarity[0, 3] == pytest.approx(1.0)
        assert similarity[2, 2] == 0.0
