"""
Error types used by deepbf.

Every error carries the process exit code the command-line entry point
reports for it, so library code never calls ``exit`` itself.
"""

from typing import Any


class DeepBFError(Exception):
    """
    Base class of all deepbf failures.

    Attributes:
        reason: Human-readable failure reason.
        code: Exit code reported by ``deepbf`` when this error ends a command.
        data: Optional payload attached to the error (offending values, shapes).
    """

    code: int = 3
    reason: str
    data: Any

    def __init__(self, reason: str, *args: object, code: int = None, data: Any = None) -> None:
        self.reason = reason
        if code is not None:
            self.code = code
        self.data = data
        super().__init__(reason, *args)


class UsageError(DeepBFError):
    """Raised for malformed command lines."""

    code = 1


class ConfigError(DeepBFError):
    """Raised when a run configuration fails schema validation."""

    code = 2


class InvalidParameterError(DeepBFError, ValueError):
    """Raised when distribution, model or algorithm parameters violate their invariants."""

    code = 2


class UnsupportedModelError(DeepBFError):
    """Raised when a model lacks a capability, e.g. a conjugate posterior predictive."""

    code = 2


class ShapeMismatchError(DeepBFError, ValueError):
    """Raised when array shapes do not match what a network or estimator expects."""

    code = 1


class NoOracleError(DeepBFError):
    """Raised when an exact marginal likelihood is requested but not available."""

    code = 3


class NumericError(DeepBFError):
    """Raised when a computation produces non-finite values it cannot recover from."""

    code = 3
