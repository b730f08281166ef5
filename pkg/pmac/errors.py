"""
Exception hierarchy for pmac.

Every error raised on purpose by the package derives from PmacError so the
CLI can map it to an exit code.
"""
from typing import Mapping


class PmacError(Exception):
    """Root of all pmac errors."""


class StructuralError(PmacError, ValueError):
    """Dimension mismatch, out-of-range index or invalid parameter."""


class InfeasibleProfileError(StructuralError):
    """A power profile violates the per-player power constraint."""


class SolverError(PmacError):
    """An iterative search (bisection or best-response descent) failed to converge.

    Attributes:
        bracket: Last (low, high) bracket of a bisection, if any
        iterations: Iterations spent before giving up
    """

    def __init__(self, message: str, bracket: tuple[float, float] | None = None, iterations: int = 0):
        if bracket is not None:
            message = f"{message} (bracket=[{bracket[0]:.6g}, {bracket[1]:.6g}], iterations={iterations})"
        super().__init__(message)
        self.bracket = bracket
        self.iterations = iterations


class CapExceededError(PmacError):
    """Profile space larger than the enumeration cap."""

    def __init__(self, size: int, cap: int, what: str = "profiles"):
        super().__init__(
            f"{size} {what} exceed the cap of {cap}; use sampling mode "
            f"(best-response descent) or raise the cap"
        )
        self.size = size
        self.cap = cap


class ClassificationError(PmacError):
    """No closed-form region matched, or a closed form disagreed.

    Attributes:
        residuals: Region name -> inequality margins (positive means satisfied)
    """

    def __init__(self, message: str, residuals: Mapping[str, tuple[float, ...]] | None = None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class TieError(ClassificationError):
    """A probability-zero tie made the answer ambiguous."""
