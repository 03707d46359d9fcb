"""Exception taxonomy shared across the toolkit.

The CLI maps these onto process exit codes: configuration problems exit
with 1, data problems with 2, and numerical failures with 3.
"""

from __future__ import annotations


class SatauditError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SatauditError):
    """Invalid configuration or unusable parameter combination."""


class DataError(SatauditError):
    """Input data is missing, malformed, or insufficient for the request."""


class InsufficientSignalError(DataError):
    """A fit was requested on data that carries no usable signal."""


class ConvergenceError(SatauditError):
    """An optimizer failed to converge within its iteration budget."""

    def __init__(self, message: str, *, iterations: int, objective: float,
                 gradient_norm: float):
        super().__init__(message)
        self.iterations = iterations
        self.objective = objective
        self.gradient_norm = gradient_norm

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        base = super().__str__()
        return (f"{base} (iterations={self.iterations}, "
                f"objective={self.objective:.6g}, "
                f"gradient_norm={self.gradient_norm:.3g})")
