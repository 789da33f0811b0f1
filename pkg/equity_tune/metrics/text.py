"""Per-pair text metrics over integer token sequences."""

import math
from collections import Counter
from typing import Dict, Mapping, Sequence

from ..util.exceptions import DataError


def _ngrams(tokens: Sequence[int], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_n(candidate: Sequence[int], reference: Sequence[int], n: int = 4) -> float:
    """
    BLEU with uniform weights over orders 1..n against a single reference.

    A zero clipped precision at order k is replaced by 1 / (2 * max(m_k, 1)),
    where m_k is the number of candidate k-grams. A candidate shorter than k
    facing a reference that has k-grams therefore gets precision 1/2 at that
    order. Orders longer than both sequences count as precision 1. An empty
    candidate scores 0.
    """
    if not 1 <= n <= 4:
        raise ValueError(f"BLEU order must be in 1..4, got {n}")
    if not candidate:
        return 0.0
    log_precision = 0.0
    for k in range(1, n + 1):
        cand, ref = _ngrams(candidate, k), _ngrams(reference, k)
        total = max(len(candidate) - k + 1, 0)
        if total == 0 and len(reference) < k:
            # neither side has k-grams
            continue
        clipped = sum(min(count, ref[gram]) for gram, count in cand.items())
        precision = clipped / total if clipped else 1.0 / (2 * max(total, 1))
        log_precision += math.log(precision) / n
    if len(candidate) < len(reference):
        brevity = math.exp(1.0 - len(reference) / len(candidate))
    else:
        brevity = 1.0
    return brevity * math.exp(log_precision)


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common subsequence."""
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: Sequence[int], reference: Sequence[int]) -> float:
    """LCS F-measure with equal weight on precision and recall."""
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 2 * precision * recall / (precision + recall)


def predicted_class(generated: Sequence[int], lexicon: Mapping[str, int]):
    """Class of the first generated token found in the lexicon, or None."""
    if not lexicon:
        raise DataError("Diagnosis scoring needs a non-empty lexicon")
    by_token: Dict[int, str] = {}
    for name, token in sorted(lexicon.items()):
        by_token.setdefault(token, name)
    for token in generated:
        if token in by_token:
            return by_token[token]
    return None


def diagnosis_correct(
    generated: Sequence[int], labels: Sequence[int], lexicon: Mapping[str, int]
) -> float:
    """1.0 when the first lexicon match names a gold class, else 0.0."""
    predicted = predicted_class(generated, lexicon)
    gold = {str(c) for c in labels}
    return 1.0 if predicted is not None and predicted in gold else 0.0


def diagnosis_accuracy(pairs, lexicon: Mapping[str, int]) -> float:
    """Fraction of pairs whose generation names their gold class first."""
    if not lexicon:
        raise DataError("Diagnosis scoring needs a non-empty lexicon")
    if not pairs:
        raise DataError("No pairs to score")
    correct = sum(
        diagnosis_correct(p.generated, p.labels or [], lexicon) for p in pairs
    )
    return correct / len(pairs)
