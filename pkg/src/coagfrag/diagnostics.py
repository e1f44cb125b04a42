"""Runtime diagnostics: weighted norms, a-priori envelopes, tail and
concentration checks, and the weighted distance used to compare runs.

Every bound here is computable from three certified ingredients — the
kernel envelope constants (scale, growth, singularity), the breakup
certificate (mean fragment count, fines constant), and the initial
weighted norm — so a run can check itself against the guarantees its
inputs are supposed to satisfy, without reference solutions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .discretization import State, moment
from .errors import DomainError, GridError, ModelError
from .integrator import Trajectory
from .kernels import certify_fragmentation

logger = logging.getLogger(__name__)


def weighted_norm(state: State, singularity: float) -> float:
    """Count integral with weight x + x**(-2*singularity).

    Finiteness of this norm is what all envelope bounds are phrased in; it
    appears as the ``Ynorm`` column of the time-series CSV.
    """
    s = float(singularity)
    return moment(state, lambda x: x + x ** (-2.0 * s))


def moment_envelope(horizon: float, fragment_count: float, fines_constant: float,
                    initial_norm: float) -> float:
    """A-priori bound on sup over [0, horizon] of the (1 + x + x**(-2s))
    moment, grown from the initial weighted norm.

    Exponential in the horizon through both the mean fragment count and the
    fines constant; deliberately generous — it certifies boundedness, not
    sharpness.
    """
    if horizon < 0.0:
        raise DomainError(f"horizon must be >= 0, got {horizon}")
    t = float(horizon)
    nf = float(fragment_count)
    c = float(fines_constant)
    return (math.exp(nf * t) * (nf + 1.0)
            + math.exp(c * t) * (c + 1.0) + 1.0) * float(initial_norm)


def moment_envelope_variant(horizon: float, fines_constant: float,
                            initial_norm: float) -> float:
    """Alternative constant the same growth argument yields,
    2*(e^(c*t)*(c+1) + 1)*norm; reported alongside the primary envelope."""
    if horizon < 0.0:
        raise DomainError(f"horizon must be >= 0, got {horizon}")
    c = float(fines_constant)
    return 2.0 * (math.exp(c * horizon) * (c + 1.0) + 1.0) * float(initial_norm)


def kernel_window_bound(radius: float, singularity: float, growth: float) -> float:
    """Upper bound for K(x,y) * (x*y)**singularity over (0, radius]^2,
    divided by two as it enters pairwise event counting."""
    if not radius > 0.0:
        raise DomainError(f"radius must be positive, got {radius}")
    r = float(radius)
    return 0.5 * (1.0 + r ** float(singularity)) * (1.0 + r) ** (2.0 * float(growth))


def power_split_constant(p: float) -> float:
    """Smallest c with (x+y)**p <= c*(x**p + y**p) for all x, y > 0 (p >= 0)."""
    if p < 0.0:
        raise DomainError(f"defined for p >= 0 only, got {p}")
    return max(1.0, 2.0 ** (float(p) - 1.0))


def suggested_tail_radius(initial_norm: float, epsilon: float) -> float:
    """Radius beyond which the (1 + x**-s)-weighted tail provably stays
    below epsilon: twice the initial norm over epsilon."""
    if not epsilon > 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    return 2.0 * float(initial_norm) / float(epsilon)


def tail_mass(state: State, radius: float, singularity: float) -> float:
    """(1 + x**(-singularity))-weighted count beyond ``radius``.

    The radius must exceed 1 so the weight is monotone there and the
    mass-over-radius argument behind the bound applies.
    """
    if not radius > 1.0:
        raise DomainError(f"tail radius must exceed 1, got {radius}")
    s = float(singularity)
    x = state.grid.pivots
    w = np.where(x > radius, 1.0 + x ** (-s), 0.0)
    return math.fsum(w * state.counts)


def uniform_integrability(state: State, delta: float, window: float,
                          singularity: float) -> float:
    """Largest (1 + x**(-s))-weighted content of a set of measure ``delta``
    inside (0, window).

    Greedy superlevel packing over cells, fractional last cell; exact for
    the piecewise-constant-per-cell density the grid state represents.
    """
    if not delta > 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    if not window > 0.0:
        raise DomainError(f"window must be positive, got {window}")
    s = float(singularity)
    edges = state.grid.edges
    pivots = state.grid.pivots
    widths = state.grid.widths
    avail = np.minimum(edges[1:], window) - edges[:-1]
    inside = avail > 0.0
    if not np.any(inside):
        return 0.0
    density = (1.0 + pivots[inside] ** (-s)) * state.counts[inside] / widths[inside]
    avail = avail[inside]
    order = np.argsort(density)[::-1]
    budget = float(delta)
    captured = []
    for i in order:
        if budget <= 0.0:
            break
        take = min(budget, float(avail[i]))
        captured.append(float(density[i]) * take)
        budget -= take
    return math.fsum(captured)


def weighted_distance(a: State, b: State, singularity: float, growth: float) -> float:
    """Distance sum((x**-s + x**(growth-s)) * |Na - Nb|) between two states
    on the same grid.  This is the metric the uniqueness probe reports."""
    if a.grid != b.grid:
        raise GridError("states live on different grids")
    s = float(singularity)
    g = float(growth)
    x = a.grid.pivots
    w = x ** (-s) + x ** (g - s)
    return math.fsum(w * np.abs(a.counts - b.counts))


@dataclass(frozen=True)
class EnvelopeContext:
    """Certified constants a trajectory is checked against."""

    horizon: float
    singularity: float
    growth: float
    fragment_count: float
    fines_constant: float
    initial_norm: float

    @property
    def envelope(self) -> float:
        return moment_envelope(self.horizon, self.fragment_count,
                               self.fines_constant, self.initial_norm)

    @property
    def envelope_variant(self) -> float:
        return moment_envelope_variant(self.horizon, self.fines_constant,
                                       self.initial_norm)


def build_context(trajectory: Trajectory) -> EnvelopeContext:
    """Assemble the envelope constants for a finished run.

    Runs without breakup enter with zero fragment count and zero fines
    constant; the envelope then only certifies that coagulation cannot
    raise the weighted norm.
    """
    sc = trajectory.scenario
    s = sc.singularity
    if sc.fragmentation is not None:
        cert = certify_fragmentation(sc.fragmentation, s)
        if cert.fines_constant is None:
            raise ModelError(
                "cannot build an envelope: " + "; ".join(cert.violations)
            )
        nf = sc.fragmentation.fragment_count
        fines = cert.fines_constant
    else:
        nf = 0.0
        fines = 0.0
    norm = weighted_norm(trajectory.initial, s)
    return EnvelopeContext(sc.horizon, s, sc.growth, nf, fines, norm)


@dataclass(frozen=True)
class ModulusCheck:
    t0: float
    t1: float
    measured: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound


def time_modulus(trajectory: Trajectory, ctx: EnvelopeContext,
                 pairs: Iterable[tuple[float, float]] | None = None) -> list[ModulusCheck]:
    """Plain count distance between snapshot pairs against the Lipschitz
    bound (9/2 * split^2 * envelope^2 + (fragment_count+1) * envelope) * |t1-t0|."""
    if pairs is None:
        ts = trajectory.times
        pairs = list(zip(ts[:-1], ts[1:]))
    env = ctx.envelope
    split = power_split_constant(ctx.growth)
    slope = 4.5 * split * split * env * env + (ctx.fragment_count + 1.0) * env
    checks = []
    for t0, t1 in pairs:
        a = trajectory.state_at(t0)
        b = trajectory.state_at(t1)
        measured = math.fsum(np.abs(b.counts - a.counts))
        checks.append(ModulusCheck(t0, t1, measured, slope * abs(t1 - t0)))
    return checks


@dataclass(frozen=True)
class SnapshotDiagnostics:
    t: float
    number: float
    mass: float
    fines_moment: float
    ynorm: float
    envelope_bound: float
    envelope_ok: bool
    tail_radius: float
    tail_value: float
    tail_ok: bool
    concentration: float


@dataclass(frozen=True)
class DiagnosticsReport:
    context: EnvelopeContext
    epsilon: float
    delta: float
    window: float
    rows: list[SnapshotDiagnostics]
    modulus: list[ModulusCheck]
    envelope_variant: float
    completed: bool
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return (self.completed
                and all(r.envelope_ok and r.tail_ok for r in self.rows)
                and all(m.ok for m in self.modulus))

    def to_dict(self) -> dict:
        return {
            "context": {
                "horizon": self.context.horizon,
                "singularity": self.context.singularity,
                "growth": self.context.growth,
                "fragment_count": self.context.fragment_count,
                "fines_constant": self.context.fines_constant,
                "initial_norm": self.context.initial_norm,
                "envelope": self.context.envelope,
                "envelope_variant": self.envelope_variant,
            },
            "epsilon": self.epsilon,
            "delta": self.delta,
            "window": self.window,
            "completed": self.completed,
            "failure": self.failure,
            "ok": self.ok,
            "snapshots": [
                {
                    "t": r.t, "number": r.number, "mass": r.mass,
                    "fines_moment": r.fines_moment, "ynorm": r.ynorm,
                    "envelope_bound": r.envelope_bound, "envelope_ok": r.envelope_ok,
                    "tail_radius": r.tail_radius, "tail_value": r.tail_value,
                    "tail_ok": r.tail_ok, "concentration": r.concentration,
                }
                for r in self.rows
            ],
            "modulus": [
                {"t0": m.t0, "t1": m.t1, "measured": m.measured,
                 "bound": m.bound, "ok": m.ok}
                for m in self.modulus
            ],
        }


def compute_report(trajectory: Trajectory, *, epsilon: float = 0.1,
                   tail_radius: float | None = None, delta: float = 0.01,
                   window: float = 1.0,
                   pairs: Iterable[tuple[float, float]] | None = None) -> DiagnosticsReport:
    """Full self-check of a trajectory against its certified constants."""
    ctx = build_context(trajectory)
    s = ctx.singularity
    env = ctx.envelope
    radius = tail_radius if tail_radius is not None else suggested_tail_radius(
        ctx.initial_norm, epsilon)
    rows = []
    for st in trajectory.states:
        number = moment(st, lambda x: np.ones_like(x))
        mass = moment(st, lambda x: x)
        fines = moment(st, lambda x: x ** (-2.0 * s))
        ynorm = weighted_norm(st, s)
        tail = tail_mass(st, radius, s)
        rows.append(SnapshotDiagnostics(
            t=st.t, number=number, mass=mass, fines_moment=fines, ynorm=ynorm,
            envelope_bound=env, envelope_ok=(number + ynorm) <= env,
            tail_radius=radius, tail_value=tail, tail_ok=tail <= epsilon,
            concentration=uniform_integrability(st, delta, window, s),
        ))
    checks = time_modulus(trajectory, ctx, pairs)
    report = DiagnosticsReport(
        context=ctx, epsilon=epsilon, delta=delta, window=window, rows=rows,
        modulus=checks, envelope_variant=ctx.envelope_variant,
        completed=trajectory.completed, failure=trajectory.failure,
    )
    if not report.ok:
        logger.info("diagnostics flagged a violation (completed=%s)", trajectory.completed)
    return report
