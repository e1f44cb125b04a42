"""Finite-window restriction of rates and initial data.

The solver works on a bounded size window.  Coagulation is switched off for
pairs that would leave the window (combined size above ``n``) or that
involve sizes below a small cutoff tied to the kernel singularity
(``singularity / n`` by default); breakup is switched off for parents above
``n``; initial data is clipped to the window.  As ``n`` grows these
restricted problems approach the unbounded one, which is what the
convergence harness measures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discretization import Grid, State
from .errors import DomainError
from .kernels import CoagulationKernel, FragmentationModel
from .quadrature import DEFAULT_RULE, GradedRule, _gauss_nodes


@dataclass(frozen=True)
class TruncationParams:
    """Size window for the restricted problem.

    n             upper size bound of the retained window
    singularity   kernel singularity exponent; the default pair cutoff is
                  singularity / n, below which coagulation is disabled
    lower_cutoff  explicit override for the pair cutoff (None = default)
    """

    n: float
    singularity: float = 0.0
    lower_cutoff: float | None = None

    def __post_init__(self) -> None:
        problems = []
        if not self.n > 0.0:
            problems.append(f"window bound n must be positive, got {self.n}")
        if self.singularity < 0.0:
            problems.append(f"singularity must be >= 0, got {self.singularity}")
        if self.n <= self.singularity:
            problems.append(
                f"window bound n = {self.n} must exceed the singularity "
                f"{self.singularity} so the pair cutoff sits below 1"
            )
        if self.lower_cutoff is not None and not 0.0 <= self.lower_cutoff < self.n:
            problems.append(
                f"lower_cutoff must lie in [0, n), got {self.lower_cutoff}"
            )
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def cutoff(self) -> float:
        if self.lower_cutoff is not None:
            return self.lower_cutoff
        return self.singularity / self.n


@dataclass(frozen=True)
class TruncatedKernel:
    """Collision rate restricted to the window: zero when the combined size
    exceeds n or either size sits below the pair cutoff."""

    kernel: CoagulationKernel
    params: TruncationParams

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = (x + y <= self.params.n) & (np.minimum(x, y) >= self.params.cutoff)
        rate = np.asarray(self.kernel.rate(x, y), dtype=float)
        out = np.where(inside, rate, 0.0)
        return float(out) if np.ndim(out) == 0 else out


def truncate_kernel(kernel: CoagulationKernel, params: TruncationParams) -> TruncatedKernel:
    return TruncatedKernel(kernel, params)


def truncate_selection(model: FragmentationModel, params: TruncationParams) -> Callable:
    """Breakup frequency restricted to parents inside the window."""

    def selection_n(x):
        x = np.asarray(x, dtype=float)
        try:
            vals = np.asarray(model.selection(x), dtype=float)
            if vals.shape != x.shape:
                raise TypeError
        except (TypeError, ValueError):
            # scalar-only user function: evaluate cell by cell
            vals = np.array([float(model.selection(float(v))) for v in np.ravel(x)])
            vals = vals.reshape(x.shape)
        out = np.where(x <= params.n, vals, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    return selection_n


def truncate_initial(u0: Callable, grid: Grid, n: float | None = None,
                     rule: GradedRule = DEFAULT_RULE) -> State:
    """Cell concentrations of the initial density clipped to (0, n].

    Each cell inside the window gets the Gauss integral of ``u0`` over the
    (possibly clipped) cell; cells beyond ``n`` get zero.  Negative density
    samples are rejected.
    """
    if n is None:
        n = float(grid.edges[-1])
    if not n > 0.0:
        raise DomainError(f"window bound must be positive, got {n}")
    z, w = _gauss_nodes(rule.nodes)
    counts = np.zeros(grid.cells)
    for i in range(grid.cells):
        lo = grid.edges[i]
        hi = min(grid.edges[i + 1], n)
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        xs = mid + half * z
        vals = np.asarray(u0(xs), dtype=float)
        if np.any(vals < 0.0):
            raise DomainError(
                f"initial density is negative inside cell [{lo:.6g}, {hi:.6g}]"
            )
        counts[i] = half * float(np.dot(w, vals))
    return State(grid=grid, t=0.0, counts=counts)
