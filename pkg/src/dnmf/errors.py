"""Exception types shared across the package."""


class DnmfError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DnmfError, ValueError):
    """Operand shapes are incompatible."""


class ConfigurationError(DnmfError, ValueError):
    """A configuration value or combination of options is invalid."""


class DataError(DnmfError, ValueError):
    """Input data could not be parsed or failed validation."""


class NumericError(DnmfError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""


class IterationLimitError(NumericError):
    """An iterative solver hit its iteration cap before converging.

    The best iterate found so far is available as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateDictionaryError(NumericError):
    """A coefficient row is identically zero, so its dictionary column is unidentifiable."""


class StateError(DnmfError, RuntimeError):
    """Cached state does not belong to the object it is used with."""
