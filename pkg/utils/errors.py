# =============================================================================
# FILE: errors.py
# PURPOSE:
#   Exception hierarchy shared by every package. Each error carries a short
#   machine-readable `kind` that the command tools copy into their result
#   dicts and that main.py prints on its single-line error report.
# =============================================================================

from typing import Any, Optional


class SemiDRDError(Exception):
    """Base class for all errors raised by this project."""

    kind = "error"


class InvalidArgumentError(SemiDRDError, ValueError):
    """An argument violates an operation's precondition (shape, range, size)."""

    kind = "invalid-argument"


class ConfigurationError(SemiDRDError):
    """The config file, a CLI override or a data pool is unusable."""

    kind = "configuration"


class EmptyBankError(SemiDRDError):
    """No memory-bank entry matches the requested origin tag."""

    kind = "empty-bank"


class CheckpointFormatError(SemiDRDError):
    """A checkpoint or weight file is truncated, corrupt or of another version."""

    kind = "checkpoint-format"


class ArtifactIOError(SemiDRDError, OSError):
    """An artifact could not be read from or written to disk."""

    kind = "io"


class TrainingDivergenceError(SemiDRDError):
    """
    A loss became non-finite during training.

    Args:
        message: Human readable description.
        report: The LossReport of the failing step.
        last_checkpoint: Path of the last checkpoint written before the failure.
    """

    kind = "training-divergence"

    def __init__(self, message: str, report: Any = None, last_checkpoint: Optional[str] = None):
        super().__init__(message)
        self.report = report
        self.last_checkpoint = last_checkpoint


def error_result(error: Exception) -> dict:
    """Result dict of a failed tool call."""
    kind = error.kind if isinstance(error, SemiDRDError) else "error"
    return {"success": False, "error": str(error).replace("\n", " "), "kind": kind}
