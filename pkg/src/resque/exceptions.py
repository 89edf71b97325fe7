"""Exception hierarchy shared by every module in the package."""


class ResqueError(Exception):
    """Base class for all package errors."""


class ParameterError(ResqueError, ValueError):
    """Invalid argument value, shape or combination of settings."""


class FormatError(ResqueError):
    """A tensor file could not be decoded.

    ``offset`` is the byte position at which decoding failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class MissingClassError(ResqueError, ValueError):
    """A class label required for aggregation has no samples."""

    def __init__(self, label):
        super().__init__(f"class {label} has no samples")
        self.label = label


class DegenerateError(ResqueError, ValueError):
    """A zero vector or zero-norm layer where a direction is required."""


class NumericalError(ResqueError, FloatingPointError):
    """Training produced a non-finite loss or parameter."""


class ConfigError(ResqueError):
    """An experiment configuration could not be resolved."""


class UnderPoweredError(ResqueError):
    """Too few completed records to compute a correlation."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)


class StageError(ResqueError):
    """Failure inside a multi-stage pipeline, tagged with the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
