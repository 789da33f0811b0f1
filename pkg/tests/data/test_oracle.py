import math

import attr
import pytest

from equity_tune.data.oracle import true_mi_oracle
from equity_tune.data.synth import AttributeSpec, SynthConfig
from equity_tune.util.exceptions import ConfigError


def _with_leakage(leakage):
    return SynthConfig(
        noise=0.0,
        attributes=[attr.evolve(a, leakage=leakage) for a in SynthConfig().attributes],
    )


class TestTrueMiOracle:
    def test_no_leakage(self):
        expected = {"gender": 0.0, "age": 0.0, "race": 0.0}
        assert true_mi_oracle(_with_leakage(0.0)) == expected

    def test_bijection(self):
        config = SynthConfig(
            n_findings=1,
            phrase_len=2,
            noise=0.0,
            attributes=[
                AttributeSpec(
                    name="g", groups=["a", "b"], marginals=[0.5, 0.5], leakage=1.0
                )
            ],
        )
        assert true_mi_oracle(config)["g"] == pytest.approx(math.log(2), abs=1e-12)

    def test_full_leakage_is_group_entropy(self):
        result = true_mi_oracle(_with_leakage(1.0))
        entropy = -sum(p * math.log(p) for p in [0.3, 0.4, 0.3])
        assert result["age"] == pytest.approx(entropy, abs=1e-12)

    def test_non_decreasing_in_leakage(self):
        values = [
            true_mi_oracle(_with_leakage(b))["race"]
            for b in (0.0, 0.25, 0.5, 0.75, 1.0)
        ]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_needs_noiseless_config(self):
        with pytest.raises(ConfigError):
            true_mi_oracle(SynthConfig(noise=0.1))
