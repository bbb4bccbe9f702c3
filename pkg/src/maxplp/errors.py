"""Exception types raised across the package."""


class MaxPError(Exception):
    """Base class for all package errors."""


class DegenerateInputError(MaxPError, ValueError):
    """Input carries no usable information (zero energy, singular system)."""


class UnanalyzableFrameError(MaxPError):
    """A frame could not be analyzed by any configured route."""


class UndefinedMetricError(MaxPError, ValueError):
    """A statistic is undefined for the given input (e.g. zero variance)."""


class InsufficientDataError(MaxPError, ValueError):
    pass


class SpecValidationError(MaxPError, ValueError):
    pass


class GciFileError(MaxPError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
