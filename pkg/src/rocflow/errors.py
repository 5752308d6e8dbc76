"""Exception hierarchy shared by all rocflow modules."""

from __future__ import annotations


class RocflowError(Exception):
    """Base class for every error raised by rocflow."""

    code = "Error"


class GridTooCoarse(RocflowError):
    code = "GridTooCoarse"


class OverlapMismatch(RocflowError):
    code = "OverlapMismatch"


class NonConvex(RocflowError):
    code = "NonConvex"

    def __init__(self, message: str, margin: float | None = None):
        super().__init__(message)
        self.margin = margin


class NonRealPsi(RocflowError):
    code = "NonRealPsi"


class NotUmbilic(RocflowError):
    code = "NotUmbilic"


class BadParams(RocflowError):
    code = "BadParams"


class OutOfDomain(RocflowError):
    code = "OutOfDomain"


class NotParabolic(RocflowError):
    code = "NotParabolic"


class ConeExit(RocflowError):
    """Raised when an ODE path leaves the cone psi > s >= 0.

    ``last_state`` holds the last valid ``(t, psi, s)``.
    """

    code = "ConeExit"

    def __init__(self, message: str, last_state=None, path=None):
        super().__init__(message)
        self.last_state = last_state
        self.path = path


class ExpressionSyntaxError(RocflowError):
    """Malformed flow expression; ``position`` is the 1-based column."""

    code = "SyntaxError"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(ExpressionSyntaxError):
    code = "UnknownIdentifier"


class EvalDomain(RocflowError):
    code = "EvalDomain"


class ConfigError(RocflowError):
    code = "ConfigError"
