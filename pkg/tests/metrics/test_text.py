import math

import numpy as np
import pytest

from equity_tune.metrics.pairs import ScoredPair
from equity_tune.metrics.text import (
    bleu_n,
    diagnosis_accuracy,
    diagnosis_correct,
    lcs_length,
    predicted_class,
    rouge_l,
)
from equity_tune.util.exceptions import DataError

LEXICON = {"0": 6, "1": 11, "2": 16}


class TestBleu:
    def test_clipped_unigrams(self):
        assert bleu_n([1, 1, 1], [1, 2, 3], n=1) == pytest.approx(1 / 3)

    def test_identical(self):
        assert bleu_n([5, 6, 7, 8, 9], [5, 6, 7, 8, 9], n=4) == pytest.approx(1.0)

    def test_short_identical_skips_long_orders(self):
        assert bleu_n([5, 6], [5, 6], n=4) == pytest.approx(1.0)

    def test_disjoint_smoothing(self):
        candidate, reference = [1, 2, 3], [4, 5, 6, 7]
        brevity = math.exp(1 - 4 / 3)
        assert bleu_n(candidate, reference, n=1) == pytest.approx(brevity / 6)

    def test_short_candidate_smooths_missing_order(self):
        # order 2: no candidate bigrams against one reference bigram
        expected = math.exp(1 - 2) * math.sqrt(0.5)
        assert bleu_n([5], [5, 6], n=2) == pytest.approx(expected)

    def test_brevity_penalty(self):
        assert bleu_n([1, 2], [1, 2, 3, 4], n=1) == pytest.approx(math.exp(1 - 2))

    def test_empty_candidate(self):
        assert bleu_n([], [1, 2], n=4) == 0.0

    def test_order_range(self):
        with pytest.raises(ValueError):
            bleu_n([1], [1], n=5)

    def test_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            candidate = list(rng.integers(0, 6, size=rng.integers(0, 9)))
            reference = list(rng.integers(0, 6, size=rng.integers(1, 9)))
            for n in (1, 4):
                assert 0.0 <= bleu_n(candidate, reference, n) <= 1.0 + 1e-12


class TestRouge:
    def test_hand_value(self):
        assert lcs_length([1, 2, 3, 4], [1, 3, 2, 4]) == 3
        assert rouge_l([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.75)

    def test_unequal_lengths(self):
        # P = 2/2, R = 2/4
        assert rouge_l([1, 2], [1, 9, 2, 9]) == pytest.approx(2 * 0.5 / 1.5)

    def test_no_overlap(self):
        assert rouge_l([1, 2], [3]) == 0.0
        assert rouge_l([], [3]) == 0.0

    def test_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            candidate = list(rng.integers(0, 5, size=rng.integers(0, 8)))
            reference = list(rng.integers(0, 5, size=rng.integers(1, 8)))
            assert 0.0 <= rouge_l(candidate, reference) <= 1.0


class TestDiagnosis:
    def test_first_match_wins(self):
        assert predicted_class([9, 11, 6], LEXICON) == "1"
        assert predicted_class([9, 10], LEXICON) is None

    def test_correct(self):
        assert diagnosis_correct([6, 7], [0], LEXICON) == 1.0
        assert diagnosis_correct([11], [0], LEXICON) == 0.0
        assert diagnosis_correct([16], [0, 2], LEXICON) == 1.0

    def test_accuracy(self):
        pairs = [
            ScoredPair(
                id="a", generated=[6, 7], reference=[6], attributes={}, labels=[0]
            ),
            ScoredPair(
                id="b", generated=[11], reference=[6], attributes={}, labels=[0]
            ),
            ScoredPair(
                id="c", generated=[9, 11], reference=[11], attributes={}, labels=[1]
            ),
        ]
        assert diagnosis_accuracy(pairs, LEXICON) == pytest.approx(2 / 3)

    def test_empty_lexicon(self):
        with pytest.raises(DataError):
            predicted_class([6], {})
        with pytest.raises(DataError):
            diagnosis_accuracy([], {})
