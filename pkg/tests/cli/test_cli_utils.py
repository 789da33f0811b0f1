from pathlib import Path

import click
import pytest
from click.exceptions import BadParameter
from click.testing import CliRunner

from equity_tune.cli.utils import (
    OverrideType,
    exit_on_error,
    is_valid_file,
    parse_attribute_points,
    parse_weight_points,
)
from equity_tune.util.exceptions import ConfigError, DataError

TEST_DIR = Path(__file__).parent.parent


class TestUtils:
    def test_is_valid_file(self):
        with pytest.raises(BadParameter):
            assert is_valid_file(None, None, "invalid")
        with pytest.raises(BadParameter):
            assert is_valid_file(None, None, str(TEST_DIR))
        assert is_valid_file(None, None, str(TEST_DIR / "conftest.py")) == str(
            TEST_DIR / "conftest.py"
        )
        assert is_valid_file(None, None, None) is None

    def test_override_type(self):
        override = OverrideType()
        assert override.convert("train.epochs=3", None, None) == ("train.epochs", 3)
        assert override.convert("report.metrics=[bleu1, rougeL]", None, None) == (
            "report.metrics",
            ["bleu1", "rougeL"],
        )
        assert override.convert("paths.out=a=b", None, None) == ("paths.out", "a=b")
        with pytest.raises(BadParameter):
            override.convert("train.epochs", None, None)
        with pytest.raises(BadParameter):
            override.convert("=3", None, None)

    def test_parse_weight_points(self):
        assert parse_weight_points(None, None, ("0.1,1.0,2",)) == [
            {"lambda_dac": 0.1, "lambda_dim": 1.0, "lambda_lm": 2.0}
        ]
        with pytest.raises(BadParameter):
            parse_weight_points(None, None, ("0.1,1.0",))
        with pytest.raises(BadParameter):
            parse_weight_points(None, None, ("a,b,c",))

    def test_parse_attribute_points(self):
        assert parse_attribute_points(None, None, ("race=0.2, age=0.6",)) == [
            {"attribute_weights": {"race": 0.2, "age": 0.6}}
        ]
        with pytest.raises(BadParameter):
            parse_attribute_points(None, None, ("race",))
        with pytest.raises(BadParameter):
            parse_attribute_points(None, None, ("race=high",))

    @pytest.mark.parametrize(
        "error, code", [(ConfigError("bad"), 2), (DataError("bad"), 3)]
    )
    def test_exit_on_error(self, error, code):
        @click.command()
        @exit_on_error
        def failing():
            raise error

        result = CliRunner().invoke(failing, [])
        assert result.exit_code == code
        assert "Error: bad" in result.output
