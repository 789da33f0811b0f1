"""Exact I(a; x) of a noiseless generator configuration."""

import itertools
from fractions import Fraction
from typing import Dict

from ..fairness.club import exact_mutual_information
from ..util.exceptions import ConfigError


def true_mi_oracle(config) -> Dict[str, float]:
    """
    Mutual information in nats between each attribute and the features.

    With zero noise, x is a function of the finding and of the groups of
    attributes with non-zero leakage, and distinct such tuples give distinct
    x because the generator's directions are orthonormal. The joint of
    (x-cell, group) is enumerated exactly with rational probabilities.
    """
    if config.noise != 0:
        raise ConfigError(
            f"The mutual information oracle needs noise == 0, got {config.noise}"
        )
    finding_p = Fraction(1, config.n_findings)
    marginals = [[Fraction(m) for m in spec.marginals] for spec in config.attributes]
    leaking = [i for i, spec in enumerate(config.attributes) if spec.leakage > 0]

    result = {}
    for index, spec in enumerate(config.attributes):
        cells: Dict[tuple, Dict[int, Fraction]] = {}
        group_ranges = [range(len(s.groups)) for s in config.attributes]
        for groups in itertools.product(*group_ranges):
            p_groups = Fraction(1)
            for i, g in enumerate(groups):
                p_groups *= marginals[i][g]
            if p_groups == 0:
                continue
            for finding in range(config.n_findings):
                cell = (finding,) + tuple(groups[i] for i in leaking)
                row = cells.setdefault(cell, {})
                previous = row.get(groups[index], Fraction(0))
                row[groups[index]] = previous + finding_p * p_groups
        joint = [
            [row.get(g, Fraction(0)) for g in range(len(spec.groups))]
            for _, row in sorted(cells.items())
        ]
        result[spec.name] = exact_mutual_information(joint)
    return result
