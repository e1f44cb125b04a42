"""Sectional discretization on a geometric grid with two-point redistribution.

Cell concentrations live at pivots (geometric cell midpoints).  Every birth
— a merged pair or a breakup fragment — is split between the two pivots
bracketing its size with the unique weights that preserve both count and
mass, so the assembled right-hand side conserves mass to roundoff by
construction rather than by quadrature accuracy.

Births outside the pivot range get the same two-point treatment against a
virtual partner, keeping every weight nonnegative (no cell can be driven
below zero by a birth term):

* fragments below the first pivot pair it with a zero-size ghost — the
  first cell receives interval_mass / x_0 counts (mass exact on the grid)
  and the leftover count is reported as a below-grid tally;
* merged sizes above the last pivot pair it with the window edge x_max —
  the edge share is reported as a count/mass tally rather than scattered.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, GridError, NumericError
from .quadrature import DEFAULT_RULE, GradedRule, gauss_panel, integrate_graded

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    """Geometric size grid: edges and pivots at geometric cell midpoints."""

    edges: np.ndarray

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges, dtype=float)
        object.__setattr__(self, "edges", edges)
        if edges.ndim != 1 or edges.size < 3:
            raise GridError("a grid needs at least 2 cells (3 edges)")
        if not np.all(edges > 0.0):
            raise GridError("grid edges must be positive")
        if not np.all(np.diff(edges) > 0.0):
            raise GridError("grid edges must be strictly increasing")
        object.__setattr__(self, "pivots", np.sqrt(edges[:-1] * edges[1:]))

    pivots: np.ndarray = field(init=False, repr=False)

    @property
    def cells(self) -> int:
        return self.edges.size - 1

    @property
    def x_min(self) -> float:
        return float(self.edges[0])

    @property
    def x_max(self) -> float:
        return float(self.edges[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def ratio(self) -> float:
        return float(self.edges[1] / self.edges[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:  # frozen dataclass with array field
        return hash((self.edges.size, float(self.edges[0]), float(self.edges[-1])))


def build_grid(x_min: float, n: float, cells: int) -> Grid:
    """Geometric grid of ``cells`` cells spanning [x_min, n]."""
    problems = []
    if not x_min > 0.0:
        problems.append(f"x_min must be positive, got {x_min}")
    if not n > x_min:
        problems.append(f"upper bound n = {n} must exceed x_min = {x_min}")
    if not (isinstance(cells, (int, np.integer)) and cells >= 2):
        problems.append(f"cells must be an integer >= 2, got {cells!r}")
    if problems:
        raise GridError("; ".join(problems))
    return Grid(np.geomspace(x_min, n, cells + 1))


@dataclass
class State:
    """Per-cell particle concentrations at one instant."""

    grid: Grid
    t: float
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (self.grid.cells,):
            raise GridError(
                f"counts shape {self.counts.shape} does not match the grid "
                f"({self.grid.cells} cells)"
            )

    def copy(self) -> "State":
        return State(self.grid, self.t, self.counts.copy())

    def __eq__(self, other) -> bool:
        return (isinstance(other, State) and self.grid == other.grid
                and self.t == other.t
                and np.array_equal(self.counts, other.counts))


def moment(state: State, weight: Callable | float) -> float:
    """Weighted count sum(weight(pivot_i) * N_i), compensated summation."""
    if callable(weight):
        w = np.asarray(weight(state.grid.pivots), dtype=float)
    else:
        w = np.full(state.grid.cells, float(weight))
    if w.shape != state.counts.shape:
        raise DomainError("weight function must map the pivot array to an equal-length array")
    return math.fsum(w * state.counts)


@dataclass(frozen=True)
class RhsBreakdown:
    """The four assembled rate vectors plus the off-grid tallies.

    subpivot_count is the fragment count rate parked below the first pivot
    (those fragments carry no on-grid mass); edge_count and edge_mass are
    the merged-particle count and mass rates parked at the window edge.
    """

    birth_coag: np.ndarray
    death_coag: np.ndarray
    birth_frag: np.ndarray
    death_frag: np.ndarray
    subpivot_count: float = 0.0
    edge_count: float = 0.0
    edge_mass: float = 0.0

    def total(self) -> np.ndarray:
        return self.birth_coag - self.death_coag + self.birth_frag - self.death_frag


def _bracket_pairs(pivots: np.ndarray, top: float,
                   sizes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Two-point redistribution targets and weights for merged sizes.

    Returns (lo_idx, hi_idx, w_lo, w_hi) with w_lo + w_hi = 1 and
    w_lo*x_lo + w_hi*x_hi = size.  Sizes above the last pivot pair it with
    the virtual pivot ``top`` (index pivots.size); weights stay in [0, 1]
    for any size up to ``top``.  Merged sizes never fall below the first
    pivot, so no lower fallback is needed.
    """
    count = pivots.size
    extended = np.append(pivots, top)
    k = np.searchsorted(extended, sizes, side="right") - 1
    lo = np.clip(k, 0, count - 1)
    hi = lo + 1
    plo = extended[lo]
    phi = extended[hi]
    w_hi = (sizes - plo) / (phi - plo)
    w_lo = 1.0 - w_hi
    return lo, hi, w_lo, w_hi


class RhsAssembler:
    """Precomputes grid-dependent tables and assembles rate breakdowns.

    Parameters
    ----------
    grid : Grid
    coagulation : callable or None
        Pair rate, already window-restricted if desired; must broadcast
        over arrays.
    selection : callable or None
        Breakup frequency per parent size; array-capable.
    breakage : callable or None
        Per-event fragment distribution b(x, parent).
    cell_integrals : callable or None
        Closed form (lo, hi, parent) -> (count, mass) of the breakage; used
        instead of quadrature when available.
    rule : GradedRule
        Quadrature fallback parameters for generic breakage functions.
    """

    def __init__(self, grid: Grid, coagulation: Callable | None = None,
                 selection: Callable | None = None,
                 breakage: Callable | None = None,
                 cell_integrals: Callable | None = None,
                 rule: GradedRule = DEFAULT_RULE):
        if selection is None and breakage is not None:
            raise DomainError("breakage without a selection frequency is not a model")
        if selection is not None and breakage is None:
            raise DomainError("selection without a fragment distribution is not a model")
        self.grid = grid
        x = grid.pivots
        self.pair_rate = None
        if coagulation is not None:
            K = np.asarray(coagulation(x[:, None], x[None, :]), dtype=float)
            if K.shape != (x.size, x.size):
                raise DomainError("coagulation rate must broadcast over size pairs")
            if np.any(K < 0.0) or not np.all(np.isfinite(K)):
                raise DomainError("coagulation rates must be finite and nonnegative")
            self.pair_rate = K
            merged = x[:, None] + x[None, :]
            lo, hi, w_lo, w_hi = _bracket_pairs(x, grid.x_max, merged.ravel())
            self._merge_lo = lo
            self._merge_hi = hi
            self._merge_wlo = w_lo
            self._merge_whi = w_hi
        self.selection_at = None
        self._frag_table = None
        self._frag_ghost = None
        if selection is not None:
            s = np.asarray(selection(x), dtype=float)
            if s.shape != x.shape:
                raise DomainError("selection frequency must map sizes elementwise")
            if np.any(s < 0.0) or not np.all(np.isfinite(s)):
                raise DomainError("selection frequencies must be finite and nonnegative")
            self.selection_at = s
            self._frag_table, self._frag_ghost = self._build_fragment_table(
                breakage, cell_integrals, rule)

    def _build_fragment_table(self, breakage: Callable,
                              cell_integrals: Callable | None,
                              rule: GradedRule) -> tuple[np.ndarray, np.ndarray]:
        """Expected fragments per breakup event, resolved onto pivots.

        Column j holds the two-point redistribution of the fragment
        distribution of parent pivot j over the pivot intervals; the ghost
        row carries the count share below the first pivot.  Column sums
        (table plus ghost) give the mean fragment count and mass-weighted
        column sums give back exactly the parent mass.
        """
        x = self.grid.pivots
        cells = x.size
        table = np.zeros((cells, cells))
        ghost = np.zeros(cells)
        for j in range(cells):
            parent = x[j]
            bounds = np.concatenate(([0.0], x[: j + 1]))
            los = bounds[:-1]
            his = bounds[1:]
            if cell_integrals is not None:
                counts, masses = cell_integrals(los, his, parent)
                counts = np.asarray(counts, dtype=float)
                masses = np.asarray(masses, dtype=float)
            else:
                counts = np.empty(los.size)
                masses = np.empty(los.size)
                for m in range(los.size):
                    if m == 0:
                        counts[m] = integrate_graded(
                            lambda v: np.asarray(breakage(v, parent), dtype=float),
                            0.0, his[0], rule)
                        masses[m] = integrate_graded(
                            lambda v: v * np.asarray(breakage(v, parent), dtype=float),
                            0.0, his[0], rule)
                    else:
                        counts[m] = gauss_panel(
                            lambda v: np.asarray(breakage(v, parent), dtype=float),
                            los[m], his[m], nodes=8)
                        masses[m] = gauss_panel(
                            lambda v: v * np.asarray(breakage(v, parent), dtype=float),
                            los[m], his[m], nodes=8)
            # interval 0 = (0, x_0]: pair the zero-size ghost with the first
            # pivot so the on-grid share carries the exact interval mass
            table[0, j] += masses[0] / x[0]
            ghost[j] += counts[0] - masses[0] / x[0]
            if j > 0:
                # interval m >= 1 sits between pivots m-1 and m
                lo_idx = np.arange(j)
                hi_idx = lo_idx + 1
                plo = x[lo_idx]
                phi = x[hi_idx]
                span = phi - plo
                w_lo = (phi * counts[1:] - masses[1:]) / span
                w_hi = (masses[1:] - plo * counts[1:]) / span
                np.add.at(table[:, j], lo_idx, w_lo)
                np.add.at(table[:, j], hi_idx, w_hi)
        return table, ghost

    @property
    def fragment_table(self) -> np.ndarray | None:
        return self._frag_table

    @property
    def fragment_ghost(self) -> np.ndarray | None:
        """Per-parent fragment count share below the first pivot."""
        return self._frag_ghost

    def _parts(self, c: np.ndarray):
        cells = c.size
        zero = np.zeros(cells)
        birth_coag = death_coag = birth_frag = death_frag = zero
        subpivot = edge_count = edge_mass = 0.0
        if self.pair_rate is not None:
            death_coag = c * (self.pair_rate @ c)
            events = (0.5 * self.pair_rate * np.outer(c, c)).ravel()
            lo_part = np.bincount(self._merge_lo, weights=events * self._merge_wlo,
                                  minlength=cells)
            hi_part = np.bincount(self._merge_hi, weights=events * self._merge_whi,
                                  minlength=cells + 1)
            birth_coag = lo_part + hi_part[:cells]
            edge_count = float(hi_part[cells])
            edge_mass = edge_count * self.grid.x_max
        if self.selection_at is not None:
            death_frag = self.selection_at * c
            birth_frag = self._frag_table @ death_frag
            subpivot = float(self._frag_ghost @ death_frag)
        return (birth_coag, death_coag, birth_frag, death_frag,
                subpivot, edge_count, edge_mass)

    def assemble(self, state: State) -> RhsBreakdown:
        if state.grid != self.grid:
            raise GridError("state grid does not match the assembler grid")
        parts = self._parts(state.counts)
        for tag, vec in zip(("birth_coag", "death_coag", "birth_frag", "death_frag"),
                            parts[:4]):
            if not np.all(np.isfinite(vec)):
                bad = np.nonzero(~np.isfinite(vec))[0]
                raise NumericError(
                    f"non-finite {tag} rates in cells {bad.tolist()[:8]}"
                )
        return RhsBreakdown(*parts)

    def total_rate(self, counts: np.ndarray) -> np.ndarray:
        """Net rate vector for a raw count array; hot-loop entry point."""
        bc, dc, bf, df = self._parts(counts)[:4]
        net = bc - dc + bf - df
        if not np.all(np.isfinite(net)):
            bad = np.nonzero(~np.isfinite(net))[0]
            raise NumericError(f"non-finite net rates in cells {bad.tolist()[:8]}")
        return net


def assemble_rhs(state: State, coagulation: Callable | None = None,
                 selection: Callable | None = None,
                 breakage: Callable | None = None,
                 cell_integrals: Callable | None = None,
                 rule: GradedRule = DEFAULT_RULE) -> RhsBreakdown:
    """One-shot assembly; builds the tables each call.  Hot loops should
    hold an RhsAssembler instead."""
    asm = RhsAssembler(state.grid, coagulation, selection, breakage,
                       cell_integrals, rule)
    return asm.assemble(state)
