"""Exception hierarchy shared across the package."""


class CodrivenError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDimensionError(CodrivenError, ValueError):
    pass


class NotPositiveDefiniteError(CodrivenError, ArithmeticError):
    pass


class ModelEvaluationError(CodrivenError, ArithmeticError):
    """A model produced a non-finite or otherwise unusable output.

    ``index`` is the position of the offending point inside the batch,
    or ``None`` when the failure is not tied to a single point.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ParameterError(CodrivenError, ValueError):
    pass


class DegenerateCorrelationError(CodrivenError, ArithmeticError):
    pass


class CalibrationError(CodrivenError, RuntimeError):
    pass


class FitError(CodrivenError, RuntimeError):
    pass


class LevelOverflowError(CodrivenError, RuntimeError):
    """Subset simulation ran out of levels before reaching the target event."""

    def __init__(self, message, last_threshold):
        super().__init__(message)
        self.last_threshold = last_threshold


class RegionUnreachableError(LevelOverflowError):
    pass


class ZeroOverlapError(CodrivenError, RuntimeError):
    """No surrogate-failure sample is an original-model failure."""


class ConfigError(CodrivenError, ValueError):
    pass


class StageError(CodrivenError, RuntimeError):
    """Wraps a sub-error with the pipeline stage (and iteration) it came from."""

    def __init__(self, stage, cause, iteration=None):
        where = stage if iteration is None else f"{stage} (iteration {iteration})"
        super().__init__(f"{where}: {cause}")
        self.stage = stage
        self.iteration = iteration
        self.cause = cause
