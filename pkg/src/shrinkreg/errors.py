"""Exception types shared across the package."""

from __future__ import annotations


class ShrinkageError(Exception):
    """Base class for numerical failures in estimators and solvers."""


class SingularMatrixError(ShrinkageError):
    """A linear system was singular or too ill-conditioned to trust."""


class ConvergenceError(ShrinkageError):
    """An iterative solver hit its iteration cap; carries the last iterate."""

    def __init__(self, message: str, *, lam: float | None = None, mu=None):
        super().__init__(message)
        self.lam = lam
        self.mu = mu
