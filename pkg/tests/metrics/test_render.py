import cattr
import numpy as np

from equity_tune.metrics.fairness_report import build_report
from equity_tune.metrics.formatters import (
    format_cell,
    format_group,
    format_interval,
    format_number,
    format_pass,
    format_score,
    format_slice,
)
from equity_tune.metrics.pairs import ScoredPair
from equity_tune.metrics.render import CHECKS_TEMPLATE, COUNTERFACTUAL_TEMPLATE, render
from equity_tune.pipeline import render_report


class TestFormatters:
    def test_values(self):
        assert format_score(12.3456) == "12.35"
        assert format_score(None) == "-"
        assert format_interval((1.0, 2.0, 3.0)) == "2.00 [1.00, 3.00]"
        assert format_interval(None) == "-"
        assert format_group("b", True) == "b*"
        assert format_slice({"race": "w", "age": "old"}) == "race=w, age=old"
        assert format_slice({}) == "all"
        assert format_pass(False) == "FAIL"
        assert format_number(2e-5) == "2.000e-05"
        assert format_number(0.5) == "0.5000"
        assert format_cell(True) == "pass"
        assert format_cell(np.bool_(False)) == "FAIL"
        assert format_cell(0.25) == "0.2500"
        assert format_cell(3) == 3


class TestRender:
    def test_report(self):
        pairs = [
            ScoredPair(
                id=f"p{i}", generated=[6], reference=[6], attributes={"gender": g}
            )
            for i, g in enumerate(["a"] * 12 + ["b"] * 12 + ["c"] * 2)
        ]
        report = build_report(pairs, "bleu1", "gender", n_resamples=5)
        document = {
            "reports": [cattr.unstructure(report)],
            "n_pairs": len(pairs),
            "seed": 3,
            "min_count": 10,
            "cross_sectional": [],
        }
        markdown = render_report(document)
        assert "## bleu1" in markdown
        assert "c* 100.00 (n=2)" in markdown
        assert "a 100.00 (n=12) CI 100.00 [100.00, 100.00]" in markdown
        assert "Seed: 3." in markdown
        assert "Cross-sectional" not in markdown

    def test_counterfactual(self):
        markdown = render(
            COUNTERFACTUAL_TEMPLATE,
            threshold=0.7,
            seed=0,
            results=[
                {
                    "attribute": "race",
                    "metric": "bleu4",
                    "n_matched": 3,
                    "n_pairs": 4,
                    "coverage": 0.75,
                    "gap": 1.5,
                }
            ],
        )
        assert "| race | bleu4 | 3/4 | 75.0% | 1.50 |" in markdown

    def test_checks(self):
        markdown = render(
            CHECKS_TEMPLATE,
            title="Gradient checks",
            columns=["seed", "term", "ok"],
            rows=[
                {"seed": 0, "term": "lm", "ok": True},
                {"seed": 0, "term": "dim", "ok": False},
            ],
        )
        assert markdown.startswith("# Gradient checks")
        assert "| 0 | lm | pass |" in markdown
        assert "| 0 | dim | FAIL |" in markdown
