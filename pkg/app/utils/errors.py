from typing import Optional


class PinningError(Exception):
    """Base error of the lab. Carries the process exit code used by the CLI."""

    exit_code: int = 1


class ConfigError(PinningError):
    """Invalid configuration or command parameters."""

    exit_code = 2


class NumericalError(PinningError):
    """A computation could not produce a trustworthy value."""

    exit_code = 3


class DomainError(NumericalError, ValueError):
    """Argument outside the domain of the operation (branch cut, pole, x <= 0, ...)."""


class ConvergenceError(NumericalError):
    """Iteration or quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: Optional[float] = None):
        super().__init__(message)
        self.achieved = achieved


class ContourError(NumericalError):
    """Argument-principle contour passes too close to a zero."""

    def __init__(self, message: str, min_modulus: Optional[float] = None):
        super().__init__(message)
        self.min_modulus = min_modulus


class AcceptanceError(PinningError):
    """At least one acceptance criterion failed."""

    exit_code = 4


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(exc, PinningError):
        return exc.exit_code
    return 1
