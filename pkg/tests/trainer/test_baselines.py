from collections import Counter

import numpy as np
import pytest

from equity_tune.fairness.schema import AttributeSchema
from equity_tune.trainer.baselines import resample_indices, reweight_factors
from equity_tune.util.exceptions import DataError

SCHEMA = AttributeSchema(
    attributes=["g", "r"], groups={"g": ["a", "b"], "r": ["x", "y", "z"]}
)


class TestReweightFactors:
    def test_balanced(self):
        labels = {"g": np.array([0, 1, 0, 1, 0, 1]), "r": np.array([0, 1, 2, 0, 1, 2])}
        factors = reweight_factors(SCHEMA, labels, ["g", "r"])
        assert np.allclose(factors, 1.0, atol=1e-12)

    def test_imbalanced(self):
        labels = {"g": np.array([0, 0, 0, 1])}
        factors = reweight_factors(SCHEMA, labels, ["g"])
        assert factors == pytest.approx([2 / 3, 2 / 3, 2 / 3, 2.0])
        assert factors.sum() == pytest.approx(4.0, abs=1e-9)

    def test_mean_one_over_two_attributes(self):
        rng = np.random.default_rng(0)
        labels = {"g": rng.integers(0, 2, size=50), "r": rng.integers(0, 3, size=50)}
        factors = reweight_factors(SCHEMA, labels, ["g", "r"])
        assert factors.mean() == pytest.approx(1.0, abs=1e-9)

    def test_empty_group(self):
        with pytest.raises(DataError):
            reweight_factors(SCHEMA, {"g": np.array([0, 0])}, ["g"])

    def test_needs_attributes(self):
        with pytest.raises(ValueError):
            reweight_factors(SCHEMA, {"g": np.array([0, 1])}, [])


class TestResampleIndices:
    def test_counts_within_one(self):
        labels = {"r": np.array([0] * 7 + [1] * 2 + [2] * 2)}
        indices = resample_indices(SCHEMA, labels, "r", seed=0)
        assert len(indices) == 11
        counts = Counter(labels["r"][indices])
        assert max(counts.values()) - min(counts.values()) <= 1

    def test_ninety_ten(self):
        labels = {"g": np.array([0] * 90 + [1] * 10)}
        indices = resample_indices(SCHEMA, labels, "g", seed=3)
        assert Counter(labels["g"][indices]) == {0: 50, 1: 50}
        assert set(indices[labels["g"][indices] == 1]) <= set(range(90, 100))

    def test_deterministic(self):
        labels = {"g": np.array([0] * 9 + [1] * 3)}
        first = resample_indices(SCHEMA, labels, "g", seed=5)
        assert np.array_equal(first, resample_indices(SCHEMA, labels, "g", seed=5))

    def test_unknown_attribute(self):
        with pytest.raises(DataError):
            resample_indices(SCHEMA, {"g": np.array([0, 1])}, "age")
