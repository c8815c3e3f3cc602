"""Exception types shared across the package."""


class AntiphonError(Exception):
    """Base class for errors raised by this package."""


class ShapeMismatchError(AntiphonError, ValueError):
    """An array or vector has the wrong length/shape for the operation."""


class NumericError(AntiphonError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class DataError(AntiphonError, ValueError):
    """A data file or dataset violates the expected format."""


class CheckpointError(AntiphonError, ValueError):
    """A checkpoint file is corrupt or inconsistent with its config."""


class TrainingDiverged(AntiphonError, RuntimeError):
    """Training loss became non-finite."""
