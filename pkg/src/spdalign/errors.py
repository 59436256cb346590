"""Exception hierarchy shared by every module in the package."""


class SpdAlignError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SpdAlignError):
    """Operands have incompatible shapes, or a square matrix was expected."""


class ParameterError(SpdAlignError):
    """A numeric parameter lies outside its documented range."""


class SingularityError(SpdAlignError):
    """Strict positive definiteness was required but not met."""


class NumericalError(SpdAlignError):
    """An iterative numerical routine failed or produced non-finite output."""


class DivergenceError(NumericalError):
    """Training hit a non-finite loss. ``step`` is the offending step index."""

    def __init__(self, step: int, message: str):
        super().__init__(message)
        self.step = step


class LabelError(SpdAlignError):
    """A class label is outside the declared class count."""


class EmptyClassError(SpdAlignError):
    """Statistics were requested for a class with no samples."""


class ConfigError(SpdAlignError):
    """A run-configuration file failed to parse or validate.

    ``line`` carries the 1-based line number when one is known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(SpdAlignError):
    """A data file does not conform to its documented layout."""
