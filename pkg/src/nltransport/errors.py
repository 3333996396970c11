"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "DomainError",
    "NumericalError",
    "InadmissibleStateError",
    "PoisonedStateError",
    "StepRejectedError",
    "UnsupportedStructureError",
]


class DomainError(ValueError):
    """An argument violates an operation's mathematical preconditions."""


class NumericalError(RuntimeError):
    """A computation failed to converge or produced an untrustworthy result."""


class InadmissibleStateError(NumericalError):
    """The flow state left the admissible set (det DX <= 1/2 or large perturbation)."""


class PoisonedStateError(NumericalError):
    """The flow state contains NaN or infinite positions."""


class StepRejectedError(NumericalError):
    """Fixed-point step iteration failed to contract within the iteration budget."""

    def __init__(self, message: str, residuals: list[float]):
        super().__init__(message)
        self.residuals = residuals


class UnsupportedStructureError(DomainError):
    """The sampled field lacks the structure (e.g. lattice) an operation needs."""
