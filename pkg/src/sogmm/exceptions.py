"""Exception hierarchy shared by every sogmm module."""


class SogmmError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SogmmError, ValueError):
    """An argument is outside its valid domain."""


class EmptyDataError(SogmmError, ValueError):
    """No valid depth pixels (or points) remained after filtering."""


class NumericalFailureError(SogmmError, ArithmeticError):
    """A non-finite quantity appeared during an iterative fit."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class OutOfSupportError(SogmmError, ArithmeticError):
    """The spatial marginal of the model has zero mass at the query."""


class SogmmIOError(SogmmError, OSError):
    """Base class for file-level failures."""


class UnreadableFileError(SogmmIOError):
    pass


class UnsupportedFormatError(SogmmIOError):
    pass


class DimensionMismatchError(SogmmIOError):
    pass


class ModelFormatError(SogmmIOError):
    """Base class for problems decoding a model file."""


class BadMagicError(ModelFormatError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class TruncatedFileError(ModelFormatError):
    def __init__(self, expected, actual):
        super().__init__(
            f"model file truncated: expected {expected} bytes, got {actual}"
        )
        self.expected = expected
        self.actual = actual
