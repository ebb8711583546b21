"""Exception hierarchy shared by the numerical routines and the CLI."""

from __future__ import annotations


class RebateError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RebateError, ValueError):
    """An argument is outside the domain where the quantity is defined."""


class NumericError(RebateError, ArithmeticError):
    """A non-finite value appeared where a finite one was required."""

    def __init__(self, message: str, abscissa: float | None = None):
        super().__init__(message)
        self.abscissa = abscissa


class BracketError(RebateError):
    """The supplied bracket does not enclose a sign change."""

    def __init__(self, message: str, lo: float, hi: float):
        super().__init__(message)
        self.lo = lo
        self.hi = hi


class ConvergenceError(RebateError):
    """An iterative method ran out of iterations; carries the last iterate."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class NoEquilibriumError(RebateError):
    """The indifference equation has no root for the given program."""


class MultipleEquilibriaError(RebateError):
    """More than one equilibrium cutoff exists; all of them are attached."""

    def __init__(self, message: str, cutoffs: list[float]):
        super().__init__(message)
        self.cutoffs = cutoffs


class InfeasibleError(RebateError):
    """No candidate satisfied the participation constraints."""

    def __init__(self, message: str, best_violation: float):
        super().__init__(message)
        self.best_violation = best_violation
