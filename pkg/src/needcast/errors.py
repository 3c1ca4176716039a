"""Exception hierarchy shared by every needcast module."""


class NeedcastError(Exception):
    """Base class for all library errors."""


class FormatError(NeedcastError, ValueError):
    """An input file does not follow its documented layout."""


class RowError(FormatError):
    """A single data row is invalid."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class AlignmentError(NeedcastError):
    """Tweets and weather cannot be joined into hour blocks."""


class TrainingError(NeedcastError):
    """Training data is unusable for the requested model."""


class ShapeError(NeedcastError, ValueError):
    """Tensor dimensions do not agree."""


class StateError(NeedcastError):
    """A cached forward pass does not match the backward request."""


class NumericError(NeedcastError, ArithmeticError):
    """Non-finite values appeared during optimisation."""


class ValidationError(NeedcastError, ValueError):
    """A value lies outside its allowed domain."""


class CheckpointError(NeedcastError):
    """A checkpoint file is corrupt or of an unsupported version."""


class MalformedRecordWarning(UserWarning):
    """A record was skipped while loading a data file."""


class DroppedBlockWarning(UserWarning):
    """An hour block was dropped during alignment."""
