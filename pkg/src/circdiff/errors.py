"""Exception hierarchy.

Every exception raised on purpose by the package derives from
:class:`CircDiffError`. Argument problems also subclass :class:`ValueError`
so generic callers can catch them the usual way.
"""

from __future__ import annotations


class CircDiffError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CircDiffError, ValueError):
    """An argument is outside the domain of the operation."""


class DegenerateMeanError(InvalidArgumentError):
    """The sample has (numerically) zero resultant length."""


class NearSingularTimeError(CircDiffError, ArithmeticError):
    """The elapsed time is too short for the analytic transition density."""


class SingularCovarianceError(CircDiffError, ArithmeticError):
    """A per-step covariance matrix is singular (|rho| >= 1)."""


class SolverError(CircDiffError, ArithmeticError):
    """The PDE solver could not advance the solution."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitError(CircDiffError, ArithmeticError):
    """An estimation routine failed. Carries the best iterate found."""

    def __init__(self, message: str, best=None, diagnostics: dict | None = None):
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}


class BootstrapError(CircDiffError, ArithmeticError):
    """Too many bootstrap refits failed."""


class DataError(CircDiffError, ValueError):
    """Input data file is malformed. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(CircDiffError, ValueError):
    """A run configuration is invalid."""

    def __init__(self, message: str, field: str | None = None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class ClampWarning(UserWarning):
    """A correlation estimate was pinned to the clamp boundary."""
