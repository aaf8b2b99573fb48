"""Exception hierarchy. Maps onto CLI exit codes (see cli.py)."""


class VideoSSLError(Exception):
    """Base class for all package errors."""


class ConfigurationError(VideoSSLError):
    """Invalid configuration (bad dimensions, ratios, missing init, ...)."""


class InputError(VideoSSLError):
    """Invalid data passed to an operation (shape mismatch, bad label, ...)."""


class ComputationError(VideoSSLError):
    """Numerically degenerate computation (e.g. zero-norm embedding row)."""


class TrainingError(VideoSSLError):
    """Training aborted (e.g. non-finite loss)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class UsageError(VideoSSLError):
    """API misuse (backward before forward, schema mismatch, ...)."""


class MetricError(VideoSSLError):
    """Metric undefined for the given inputs (single-class set, ...)."""


class CheckpointError(VideoSSLError):
    """Base class for checkpoint load failures."""


class BadMagicError(CheckpointError):
    """File does not start with the checkpoint magic bytes."""


class VersionMismatchError(CheckpointError):
    """Checkpoint format version is not supported."""


class TruncatedCheckpointError(CheckpointError):
    """Tensor blob section is shorter than the header promises."""
