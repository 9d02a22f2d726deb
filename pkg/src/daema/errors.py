"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: :class:`NumericError` subclasses exit
with 3, every other :class:`DaemaError` with 2.
"""


class DaemaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DaemaError, ValueError):
    """Operands have incompatible shapes."""


class ConfigError(DaemaError, ValueError):
    """Invalid configuration, registry entry or dataset layout."""


class ParseError(DaemaError, ValueError):
    """A CSV cell could not be parsed."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class UsageError(DaemaError, RuntimeError):
    """API called out of order (e.g. backward before forward)."""


class DatasetTooSmallError(DaemaError, ValueError):
    pass


class FitError(DaemaError, ValueError):
    pass


class IncompleteDataError(DaemaError, ValueError):
    """Missing cells remain where a complete matrix is required."""


class NumericError(DaemaError, ArithmeticError):
    """Base class for numeric failures (exit code 3)."""


class DegenerateError(NumericError):
    """A statistic needed for normalization is zero or undefined."""


class UndefinedMetricError(DaemaError, ValueError):
    pass


class TrainingDivergedError(NumericError):
    def __init__(self, step, loss):
        super().__init__(f"training diverged at step {step} (loss={loss!r})")
        self.step = step
        self.loss = loss


class ModelFormatError(DaemaError, ValueError):
    pass


class ExperimentError(DaemaError):
    """Wraps a failure inside an experiment with its seed and stage."""

    def __init__(self, seed, stage, cause):
        super().__init__(f"seed {seed}, stage {stage!r}: {cause}")
        self.seed = seed
        self.stage = stage
        self.cause = cause
