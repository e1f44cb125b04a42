"""Window-growth and integrator cross-checks.

The restricted problems on growing windows (0, n] should approach a single
limit; the harness runs a scenario family whose grids share the exact cell
structure below the smallest window, so count differences can be compared
cell by cell there.  The cross-check probe integrates one scenario twice —
fixed-step and adaptive — and reports the weighted distance between the
trajectories, a direct numerical stand-in for the uniqueness distance.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .diagnostics import weighted_distance
from .discretization import Grid, State, moment
from .errors import DomainError, NumericError
from .integrator import Scenario, Trajectory, run
from .kernels import CoagulationKernel, FragmentationModel
from .truncation import TruncationParams

logger = logging.getLogger(__name__)


def aligned_window_grid(n_min: float, n: float, octaves_below: int,
                        cells_per_octave: int) -> Grid:
    """Geometric grid ending at ``n`` whose edges below ``n_min`` are
    bit-identical across all window sizes of the family.

    Requires n = n_min * 2**j for an integer j; every edge is
    x0 * 2**(k / cells_per_octave) with x0 = n_min / 2**octaves_below, so
    two family members share their lower edges exactly, not just to
    rounding.
    """
    if octaves_below < 1 or cells_per_octave < 1:
        raise DomainError("octaves_below and cells_per_octave must be >= 1")
    j = math.log2(n / n_min)
    if abs(j - round(j)) > 1e-9:
        raise DomainError(
            f"window bound {n} must be n_min * 2**j for integer j (n_min = {n_min})"
        )
    j = int(round(j))
    if j < 0:
        raise DomainError(f"window bound {n} must be >= n_min = {n_min}")
    x0 = n_min / 2.0 ** octaves_below
    total = (octaves_below + j) * cells_per_octave
    edges = x0 * np.exp2(np.arange(total + 1) / cells_per_octave)
    return Grid(edges)


@dataclass(frozen=True)
class TruncationStudy:
    ns: tuple[float, ...]
    snapshots: tuple[float, ...]
    window: float
    pair_gaps: list[list[float]]      # per consecutive pair, per snapshot
    gap_max: list[float]              # per consecutive pair
    gap_rel: list[float]              # gap_max relative to the finest count
    decreasing: bool
    oracle_errors: list[float] | None
    failures: tuple[str | None, ...]  # per run, None when it completed
    trajectories: list[Trajectory]

    @property
    def final_gap_rel(self) -> float:
        return self.gap_rel[-1]

    @property
    def completed(self) -> bool:
        return all(f is None for f in self.failures)

    def to_dict(self) -> dict:
        return {
            "ns": list(self.ns),
            "snapshots": list(self.snapshots),
            "window": self.window,
            "pair_gaps": self.pair_gaps,
            "gap_max": self.gap_max,
            "gap_rel": self.gap_rel,
            "decreasing": self.decreasing,
            "final_gap_rel": self.final_gap_rel,
            "oracle_errors": self.oracle_errors,
            "failures": list(self.failures),
            "completed": self.completed,
        }


def run_truncation_sequence(ns, *, kernel: CoagulationKernel | None = None,
                            fragmentation: FragmentationModel | None = None,
                            initial: Callable,
                            horizon: float,
                            snapshots: tuple[float, ...] | None = None,
                            octaves_below: int = 14,
                            cells_per_octave: int = 8,
                            method: str = "rk4", rtol: float = 1e-6,
                            lower_cutoff: float | None = None,
                            threads: int = 1,
                            oracle=None) -> TruncationStudy:
    """Run the same problem on growing windows and measure the gaps.

    Each consecutive pair of runs is compared by the plain count distance
    over the shared cells below the smallest window, at every recorded
    snapshot.  With ``oracle`` given (a benchmark with cell_counts), each
    run's final snapshot is also scored against it on that run's full grid.
    """
    ns = tuple(float(n) for n in ns)
    if len(ns) < 3:
        raise DomainError(f"need at least 3 window sizes, got {len(ns)}")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError(f"window sizes must be strictly ascending, got {ns}")
    n_min = ns[0]
    if snapshots is None:
        snapshots = (0.0, horizon)
    sing = kernel.certificate.singularity if kernel else 0.0

    def make_scenario(n: float) -> Scenario:
        grid = aligned_window_grid(n_min, n, octaves_below, cells_per_octave)
        trunc = TruncationParams(float(grid.x_max), singularity=sing,
                                 lower_cutoff=lower_cutoff)
        return Scenario(
            grid=grid, truncation=trunc, initial=initial, horizon=horizon,
            kernel=kernel, fragmentation=fragmentation, snapshots=snapshots,
            method=method, rtol=rtol, name=f"window_n={n:g}",
        )

    scenarios = [make_scenario(n) for n in ns]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajectories = list(pool.map(run, scenarios))
    else:
        trajectories = [run(s) for s in scenarios]

    failures = tuple(t.failure for t in trajectories)
    shared = octaves_below * cells_per_octave  # cells below n_min
    compare_ts = [t for t in snapshots if t > 0.0] or list(snapshots)
    pair_gaps: list[list[float]] = []
    gap_max: list[float] = []
    gap_rel: list[float] = []
    finest = trajectories[-1]
    nan = float("nan")
    for a, b in zip(trajectories, trajectories[1:]):
        gaps = []
        rels = []
        for t in compare_ts:
            reached = (t in a.times) and (t in b.times)
            if not reached:  # one run aborted early; keep a marker
                gaps.append(nan)
                rels.append(nan)
                continue
            ca = a.state_at(t).counts[:shared]
            cb = b.state_at(t).counts[:shared]
            gap = math.fsum(np.abs(ca - cb))
            gaps.append(gap)
            if t in finest.times:
                ref = moment(finest.state_at(t), lambda x: np.ones_like(x))
            else:
                ref = 0.0
            rels.append(gap / ref if ref > 0.0 else gap)
        pair_gaps.append(gaps)
        gap_max.append(max(gaps))
        gap_rel.append(max(rels))
    decreasing = all(b < a for a, b in zip(gap_max, gap_max[1:]))

    oracle_errors = None
    if oracle is not None:
        t_last = compare_ts[-1]
        oracle_errors = []
        for traj in trajectories:
            if t_last not in traj.times:
                oracle_errors.append(nan)
                continue
            st = traj.state_at(t_last)
            ref = oracle.cell_counts(st.grid, t_last)
            oracle_errors.append(math.fsum(np.abs(st.counts - ref)))

    study = TruncationStudy(ns, tuple(snapshots), n_min, pair_gaps, gap_max,
                            gap_rel, decreasing, oracle_errors, failures,
                            trajectories)
    logger.info("window study %s: gaps %s (decreasing=%s)", ns, gap_max, decreasing)
    return study


def coarsen_counts(fine: State, coarse_grid: Grid) -> np.ndarray:
    """Bin fine-grid counts onto a coarser grid by pivot membership.

    Exact aggregation when the fine edges are a refinement of the coarse
    ones, which is how refinement studies build their grid families.
    """
    idx = np.searchsorted(coarse_grid.edges, fine.grid.pivots, side="right") - 1
    if np.any(idx < 0) or np.any(idx >= coarse_grid.cells):
        raise DomainError("fine pivots fall outside the coarse grid")
    return np.bincount(idx, weights=fine.counts, minlength=coarse_grid.cells)


@dataclass(frozen=True)
class ProbeReport:
    """Cross-integrator distances standing in for the uniqueness bound."""

    snapshots: tuple[float, ...]
    distances: tuple[float, ...]
    sup_distance: float
    singularity: float
    growth: float
    warnings: list[str]

    def within(self, tolerance: float) -> bool:
        return self.sup_distance <= tolerance

    def to_dict(self) -> dict:
        return {
            "snapshots": list(self.snapshots),
            "distances": list(self.distances),
            "sup_distance": self.sup_distance,
            "singularity": self.singularity,
            "growth": self.growth,
            "warnings": self.warnings,
        }


def uniqueness_probe(scenario: Scenario, rtol: float = 1e-8,
                     fixed_dt: float | None = None) -> ProbeReport:
    """Integrate a scenario twice (fixed-step RK4 vs adaptive RK4) and
    report the weighted distance between the trajectories per snapshot.

    Both runs discretize the same restricted problem, so the distance
    isolates integrator-induced divergence; staying tiny is evidence the
    computed trajectory is the unique one for this data.  Parameter
    combinations outside the certified uniqueness window are reported as
    warnings, not errors.
    """
    warnings = []
    gap = scenario.growth - scenario.singularity
    if gap > 0.5:
        warnings.append(
            f"growth - singularity = {gap:.4g} exceeds 1/2; the uniqueness "
            "window is not certified for this kernel"
        )
    if scenario.fragmentation is not None and scenario.fragmentation.selection_growth > gap:
        warnings.append(
            f"selection growth {scenario.fragmentation.selection_growth:.4g} exceeds "
            f"growth - singularity = {gap:.4g}; breakup outpaces the certified window"
        )
    if fixed_dt is None:
        asm = scenario.build_assembler()
        counts = scenario.initial_state().counts
        loss = np.zeros(counts.size)
        if asm.pair_rate is not None:
            loss += asm.pair_rate @ counts
        if asm.selection_at is not None:
            loss += asm.selection_at
        peak = float(loss.max(initial=0.0))
        span = scenario.snapshots[-1] if scenario.snapshots else scenario.horizon
        fixed_dt = min(span / 200.0, 0.2 / peak if peak > 0.0 else span / 200.0)
    fixed = run(replace(scenario, method="rk4", adaptive=False, dt=fixed_dt,
                        name=scenario.name + "_fixed"))
    adaptive = run(replace(scenario, method="rk4", adaptive=True, rtol=rtol,
                           name=scenario.name + "_adaptive"))
    if not (fixed.completed and adaptive.completed):
        raise NumericError(
            "probe runs did not complete: "
            f"fixed={fixed.failure!r}, adaptive={adaptive.failure!r}"
        )
    ts = tuple(t for t in fixed.times if t > 0.0)
    dists = tuple(
        weighted_distance(fixed.state_at(t), adaptive.state_at(t),
                          scenario.singularity, scenario.growth)
        for t in ts
    )
    sup = max(dists) if dists else 0.0
    report = ProbeReport(ts, dists, sup, scenario.singularity, scenario.growth,
                         warnings)
    logger.info("uniqueness probe %s: sup distance %.3e", scenario.name, sup)
    return report
