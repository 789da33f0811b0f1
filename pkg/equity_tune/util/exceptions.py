"""Common exception types.

The command line maps each family to its own exit code: configuration
problems exit with 2, data problems with 3, numeric failures with 4.
"""


class EquityTuneError(Exception):
    """Base class for all errors raised by equity-tune."""

    exit_code = 1


class ConfigError(EquityTuneError):
    """Raised when a configuration document or override is invalid."""

    exit_code = 2


class DataError(EquityTuneError):
    """Raised when a dataset, prediction file or checkpoint is unusable."""

    exit_code = 3


class NumericError(EquityTuneError):
    """Raised on non-finite values, failed gradient checks or divergence."""

    exit_code = 4


class ShapeError(NumericError):
    """Raised when operand shapes do not conform to a primitive's contract."""

    def __init__(self, op, *shapes):
        """Name the op and every operand shape."""
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        rendered = " and ".join(str(s) for s in self.shapes)
        super(ShapeError, self).__init__(f"Shape mismatch in {op}: {rendered}")


class CoverageError(DataError):
    """Raised when counterfactual matching finds no admissible pair."""

    def __init__(self, message, coverage):
        """Attach the coverage report to the error."""
        self.coverage = coverage
        super(CoverageError, self).__init__(f"{message}; coverage: {coverage}")

    @staticmethod
    def raise_if_empty(matched, coverage):
        """Raise this exception if nothing was matched."""
        if not matched:
            raise CoverageError("No counterfactual pairs matched", coverage)
