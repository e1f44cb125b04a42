"""Explicit time integration with positivity clamping and step doubling.

Steps are explicit Euler or classic RK4.  A candidate step is rejected —
a retriable signal, not an error — when any cell dips below
``-clamp_rel * max cell value``; smaller negative excursions are clamped
to zero and the clamped mass is tallied.  The adaptive driver compares one
full step against two half steps, scales the step from the gap, and lands
on every requested snapshot time exactly.  If rejections push the step
below ``dt_min`` the run aborts and returns the partial trajectory with a
failure note instead of raising.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .discretization import Grid, RhsAssembler, State, moment
from .errors import DomainError, NumericError
from .kernels import CoagulationKernel, FragmentationModel
from .quadrature import DEFAULT_RULE, GradedRule
from .truncation import TruncationParams, truncate_initial, truncate_kernel, truncate_selection

logger = logging.getLogger(__name__)

_ORDER = {"euler": 1, "rk4": 4}


@dataclass
class Scenario:
    """A complete restricted problem plus integration controls."""

    grid: Grid
    truncation: TruncationParams
    initial: Callable
    horizon: float
    kernel: CoagulationKernel | None = None
    fragmentation: FragmentationModel | None = None
    snapshots: tuple[float, ...] | None = None
    method: str = "rk4"
    adaptive: bool = True
    rtol: float = 1e-6
    atol: float = 1e-12
    dt: float | None = None
    dt_min: float = 1e-12
    clamp_rel: float = 1e-14
    name: str = "scenario"

    def __post_init__(self) -> None:
        problems = []
        if not self.horizon >= 0.0:
            problems.append(f"horizon must be >= 0, got {self.horizon}")
        if self.snapshots is None:
            self.snapshots = (0.0, self.horizon) if self.horizon > 0 else (0.0,)
        self.snapshots = tuple(sorted(set(float(s) for s in self.snapshots)))
        if self.snapshots and (self.snapshots[0] < 0.0 or self.snapshots[-1] > self.horizon):
            problems.append(
                f"snapshots must lie inside [0, horizon], got {self.snapshots}"
            )
        if self.method not in _ORDER:
            problems.append(f"method must be one of {sorted(_ORDER)}, got {self.method!r}")
        if not self.adaptive and (self.dt is None or not self.dt > 0.0):
            problems.append("fixed-step runs need dt > 0")
        if not self.rtol > 0.0:
            problems.append(f"rtol must be positive, got {self.rtol}")
        if self.atol < 0.0:
            problems.append(f"atol must be >= 0, got {self.atol}")
        if not self.dt_min > 0.0:
            problems.append(f"dt_min must be positive, got {self.dt_min}")
        if abs(self.grid.x_max - self.truncation.n) > 1e-9 * self.truncation.n:
            problems.append(
                f"grid upper edge {self.grid.x_max} must equal the window bound "
                f"{self.truncation.n}"
            )
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def singularity(self) -> float:
        return self.kernel.certificate.singularity if self.kernel else 0.0

    @property
    def growth(self) -> float:
        return self.kernel.certificate.growth if self.kernel else 0.0

    def build_assembler(self, rule: GradedRule = DEFAULT_RULE) -> RhsAssembler:
        coag = truncate_kernel(self.kernel, self.truncation) if self.kernel else None
        if self.fragmentation is not None:
            sel = truncate_selection(self.fragmentation, self.truncation)
            brk = self.fragmentation.breakage
            ci = self.fragmentation.cell_integrals
        else:
            sel = brk = ci = None
        return RhsAssembler(self.grid, coag, sel, brk, ci, rule)

    def initial_state(self, rule: GradedRule = DEFAULT_RULE) -> State:
        state = truncate_initial(self.initial, self.grid, self.truncation.n, rule)
        norm = moment(state, lambda x: x + x ** (-2.0 * self.singularity))
        if not math.isfinite(norm):
            raise DomainError("initial data has non-finite weighted norm on this grid")
        return state


@dataclass
class StepResult:
    state: State | None
    rejected: bool
    clamped_count: float = 0.0
    clamped_mass: float = 0.0


def _clamp(counts: np.ndarray, prev: np.ndarray, pivots: np.ndarray,
           clamp_rel: float) -> tuple[np.ndarray, bool, float, float]:
    scale = max(float(counts.max(initial=0.0)), float(prev.max(initial=0.0)))
    threshold = clamp_rel * scale
    low = float(counts.min(initial=0.0))
    if low < -threshold:
        return counts, True, 0.0, 0.0
    neg = counts < 0.0
    if not np.any(neg):
        return counts, False, 0.0, 0.0
    clamped_count = float(-counts[neg].sum())
    clamped_mass = float(-(counts[neg] * pivots[neg]).sum())
    out = counts.copy()
    out[neg] = 0.0
    return out, False, clamped_count, clamped_mass


def step(state: State, dt: float, assembler: RhsAssembler,
         method: str = "rk4", clamp_rel: float = 1e-14) -> StepResult:
    """One explicit step.  Rejection (negative cell beyond the clamp band,
    or non-finite rates mid-stage) is reported, not raised."""
    if not dt > 0.0:
        raise DomainError(f"dt must be positive, got {dt}")
    if method not in _ORDER:
        raise DomainError(f"method must be one of {sorted(_ORDER)}, got {method!r}")
    c = state.counts
    f = assembler.total_rate
    try:
        if method == "euler":
            cn = c + dt * f(c)
        else:
            k1 = f(c)
            k2 = f(c + 0.5 * dt * k1)
            k3 = f(c + 0.5 * dt * k2)
            k4 = f(c + dt * k3)
            cn = c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    except NumericError:
        return StepResult(None, True)
    if not np.all(np.isfinite(cn)):
        return StepResult(None, True)
    cn, rejected, cc, cm = _clamp(cn, c, state.grid.pivots, clamp_rel)
    if rejected:
        return StepResult(None, True)
    return StepResult(State(state.grid, state.t + dt, cn), False, cc, cm)


@dataclass
class IntegrationStats:
    accepted: int = 0
    rejected: int = 0
    clamped_count: float = 0.0
    clamped_mass: float = 0.0
    dts: list[float] = field(default_factory=list)


@dataclass
class Trajectory:
    """Recorded snapshot states plus bookkeeping for one run."""

    scenario: Scenario
    initial: State
    states: list[State]
    stats: IntegrationStats
    completed: bool = True
    failure: str | None = None

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(s.t for s in self.states)

    def state_at(self, t: float) -> State:
        for s in self.states:
            if s.t == t:
                return s
        raise DomainError(f"no snapshot recorded at t = {t}")


def _initial_dt(assembler: RhsAssembler, counts: np.ndarray, span: float) -> float:
    loss = np.zeros(counts.size)
    if assembler.pair_rate is not None:
        loss += assembler.pair_rate @ counts
    if assembler.selection_at is not None:
        loss += assembler.selection_at
    peak = float(loss.max(initial=0.0))
    dt = span / 32.0
    if peak > 0.0:
        dt = min(dt, 0.25 / peak)
    return max(dt, 1e-300)


def run(scenario: Scenario, rule: GradedRule = DEFAULT_RULE) -> Trajectory:
    """Integrate the scenario, recording every snapshot time exactly."""
    assembler = scenario.build_assembler(rule)
    state = scenario.initial_state(rule)
    initial = state.copy()
    stats = IntegrationStats()
    recorded: list[State] = []
    targets = list(scenario.snapshots)
    if targets and targets[0] == 0.0:
        recorded.append(state.copy())
        targets = targets[1:]
    if not targets:
        return Trajectory(scenario, initial, recorded, stats)

    order = _ORDER[scenario.method]
    shrink_cap, grow_cap, safety = 0.2, 5.0, 0.9
    err_div = 2.0 ** order - 1.0
    dt = scenario.dt if not scenario.adaptive else _initial_dt(
        assembler, state.counts, targets[-1])
    t = 0.0

    for target in targets:
        while t < target:
            proposed = dt
            dt_try = min(dt, target - t)
            hit = dt_try >= (target - t) * (1.0 - 1e-12)
            if hit:
                dt_try = target - t
            if dt_try < scenario.dt_min:
                msg = f"step size {dt_try:.3e} fell below dt_min = {scenario.dt_min:.3e}"
                logger.warning("run %s aborted at t=%.6g: %s", scenario.name, t, msg)
                return Trajectory(scenario, initial, recorded, stats,
                                  completed=False, failure=msg)
            full = step(state, dt_try, assembler, scenario.method, scenario.clamp_rel)
            if full.rejected:
                stats.rejected += 1
                dt = 0.5 * dt_try
                continue
            if scenario.adaptive:
                h1 = step(state, 0.5 * dt_try, assembler, scenario.method, scenario.clamp_rel)
                h2 = (step(h1.state, 0.5 * dt_try, assembler, scenario.method,
                           scenario.clamp_rel)
                      if not h1.rejected else h1)
                if h1.rejected or h2.rejected:
                    stats.rejected += 1
                    dt = 0.5 * dt_try
                    continue
                diff = np.abs(full.state.counts - h2.state.counts)
                scale = scenario.atol + scenario.rtol * np.maximum(
                    np.abs(state.counts), np.abs(h2.state.counts))
                err = float((diff / scale).max(initial=0.0)) / err_div
                if err > 1.0:
                    stats.rejected += 1
                    dt = dt_try * max(shrink_cap, safety * err ** (-1.0 / (order + 1)))
                    continue
                new_state = h2.state
                stats.clamped_count += h1.clamped_count + h2.clamped_count
                stats.clamped_mass += h1.clamped_mass + h2.clamped_mass
                factor = grow_cap if err == 0.0 else min(
                    grow_cap, max(shrink_cap, safety * err ** (-1.0 / (order + 1))))
                # resume from the uncapped proposal after landing on a target
                dt = max(dt_try * factor, proposed if hit else 0.0)
            else:
                new_state = full.state
                stats.clamped_count += full.clamped_count
                stats.clamped_mass += full.clamped_mass
                dt = scenario.dt
            stats.accepted += 1
            stats.dts.append(dt_try)
            t = target if hit else t + dt_try
            new_state.t = t
            state = new_state
        recorded.append(state.copy())
    return Trajectory(scenario, initial, recorded, stats)
