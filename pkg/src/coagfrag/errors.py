"""Exception types shared across the solver."""

from __future__ import annotations


class SolverError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SolverError):
    """An argument lies outside the admissible parameter domain."""


class ModelError(SolverError):
    """A rate model is internally inconsistent, e.g. breakup output from a
    parent size whose selection rate is zero."""


class QuadratureError(SolverError):
    """Panel integration failed to converge, or the integrand looks
    non-integrable near the singular endpoint."""


class GridError(SolverError):
    """Grid construction failed or two grids do not share the structure an
    operation requires."""


class NumericError(SolverError):
    """Non-finite values appeared, or the step size collapsed below the
    configured floor."""


class ConfigError(SolverError):
    """Invalid run configuration.  Collects every validation failure so a
    user can fix all of them in one pass."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
