"""Exception types shared across the package."""

from __future__ import annotations


class WorkcapError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(WorkcapError, ValueError):
    """Shapes or alphabets do not line up."""


class DomainError(WorkcapError, ValueError):
    """An argument is outside the operation's domain (e.g. a non-return state)."""


class ConvergenceError(WorkcapError, RuntimeError):
    """An iterative computation did not converge within its budget."""

    def __init__(self, message: str, residual: float | None = None,
                 estimates: tuple[float, float] | None = None):
        super().__init__(message)
        self.residual = residual
        self.estimates = estimates


class BudgetError(WorkcapError, RuntimeError):
    """An exact enumeration would exceed the configured memory budget."""

    def __init__(self, message: str, required: int | None = None, budget: int | None = None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class ChannelClassError(WorkcapError, ValueError):
    """A model does not belong to the channel class an operation requires."""


class ModelFormatError(WorkcapError, ValueError):
    """A model file or in-memory model violates the file-format contract."""


class InternalConsistencyError(WorkcapError, RuntimeError):
    """A quantity that must be nonnegative came out negative beyond rounding."""
