"""
Exception hierarchy for the gap-acceptance queue toolkit.
Every error carries a machine-readable category and the process exit code
the command line reports for it.
"""

from typing import Optional


class GapQueueError(Exception):
    """Base class for all toolkit errors."""

    category = "internal"
    exit_code = 1


class ConfigError(GapQueueError):
    """Invalid experiment configuration; names the offending key."""

    category = "config"
    exit_code = 2

    def __init__(self, key: str, constraint: str):
        self.key = key
        self.constraint = constraint
        super().__init__(f"{key}: {constraint}")


class ModelError(GapQueueError):
    """Invalid model parameters (phase process, behavior, batch sizes)."""

    category = "model"
    exit_code = 3


class UnstableQueueError(GapQueueError):
    """The offered load is too high for a stationary analysis."""

    category = "unstable"
    exit_code = 4

    def __init__(self, rho: float, message: Optional[str] = None):
        self.rho = rho
        super().__init__(message or f"queue is unstable (rho = {rho:.6f} >= 1)")


class NumericalError(GapQueueError):
    """A numerical procedure failed or lost accuracy."""

    category = "numerical"
    exit_code = 5


class JetError(NumericalError, ZeroDivisionError):
    """Invalid truncated-Taylor operation (e.g. division by a zero constant term)."""


class SingularMatrixError(NumericalError):
    """A linear system is numerically singular."""


class RootCountError(NumericalError):
    """The argument principle disagrees with the number of roots found or expected."""
