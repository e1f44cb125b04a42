"""Collision-rate kernels and breakup models, with runtime certification.

A coagulation kernel ships with an envelope certificate: constants
(scale, growth, singularity) such that

    K(x, y) <= scale * (1+x)**growth * (1+y)**growth * (x*y)**(-singularity)

holds everywhere, with growth - singularity in [0, 1).  Everything the
solver later promises (moment envelopes, tail bounds, time modulus) is
phrased through these three numbers, so the certificate is checked by
brute-force sampling rather than trusted.

Breakup is described by a production density ``production(parent, x)``
giving the rate density of fragments of size x from a parent.  From it the
selection frequency and the per-event fragment distribution are derived;
closed forms are provided for the power-law family.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, ModelError, QuadratureError
from .quadrature import DEFAULT_RULE, GradedRule, integrate_graded

logger = logging.getLogger(__name__)

RateFn = Callable[..., np.ndarray]


@dataclass(frozen=True)
class EnvelopeCertificate:
    """Constants bounding a kernel by separable growth/singularity factors.

    scale        multiplicative constant, > 0
    growth       exponent of the (1 + size) factors
    singularity  exponent of the small-size blow-up (x*y)**(-singularity)

    Admissibility requires growth - singularity in [0, 1); the constructor
    rejects anything else because none of the solver's guarantees hold
    outside that window.
    """

    scale: float
    growth: float
    singularity: float

    def __post_init__(self) -> None:
        problems = []
        if not self.scale > 0.0:
            problems.append(f"scale must be positive, got {self.scale}")
        if self.singularity < 0.0:
            problems.append(f"singularity must be >= 0, got {self.singularity}")
        gap = self.growth - self.singularity
        if not 0.0 <= gap < 1.0:
            problems.append(
                f"growth - singularity must lie in [0, 1), got {gap}"
            )
        if problems:
            raise DomainError("; ".join(problems))

    def bound(self, x, y):
        """Evaluate the envelope at (x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = self.scale * (1.0 + x) ** self.growth * (1.0 + y) ** self.growth
        if self.singularity != 0.0:
            out = out * (x * y) ** (-self.singularity)
        return out


@dataclass(frozen=True)
class CoagulationKernel:
    """A symmetric nonnegative collision rate with its envelope certificate."""

    name: str
    rate: RateFn
    certificate: EnvelopeCertificate


def _smoluchowski_rate(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cx, cy = np.cbrt(x), np.cbrt(y)
    return (cx + cy) * (1.0 / cx + 1.0 / cy)


def _eke_rate(x, y):
    # collision frequency for grains equilibrated to equal kinetic energy
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cx, cy = np.cbrt(x), np.cbrt(y)
    return (cx + cy) ** 2 * np.sqrt(1.0 / x + 1.0 / y)


def _constant_rate(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.ones(np.broadcast_shapes(x.shape, y.shape))


def _product_rate(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sqrt(x * y)


SMOLUCHOWSKI = CoagulationKernel(
    "smoluchowski", _smoluchowski_rate,
    EnvelopeCertificate(scale=4.0, growth=2.0 / 3.0, singularity=1.0 / 3.0),
)

EKE = CoagulationKernel(
    "eke", _eke_rate,
    EnvelopeCertificate(scale=8.0, growth=7.0 / 6.0, singularity=0.5),
)

CONSTANT = CoagulationKernel(
    "constant", _constant_rate,
    EnvelopeCertificate(scale=1.0, growth=0.0, singularity=0.0),
)

PRODUCT = CoagulationKernel(
    "product", _product_rate,
    EnvelopeCertificate(scale=1.0, growth=0.5, singularity=0.0),
)

BUILTIN_KERNELS: dict[str, CoagulationKernel] = {
    k.name: k for k in (SMOLUCHOWSKI, EKE, CONSTANT, PRODUCT)
}


def eval_kernel(kernel: CoagulationKernel, x, y):
    """Evaluate the collision rate, rejecting non-positive sizes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise DomainError("particle sizes must be positive")
    out = kernel.rate(x, y)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class EnvelopeViolation:
    x: float
    y: float
    rate: float
    bound: float


@dataclass(frozen=True)
class EnvelopeReport:
    kernel: str
    certificate: EnvelopeCertificate
    samples: int
    violations: list[EnvelopeViolation]

    @property
    def ok(self) -> bool:
        return not self.violations


def log_pair_grid(lo: float = 1e-6, hi: float = 1e6, count: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Meshgrid of log-spaced size pairs used for sampling certifications."""
    if not 0.0 < lo < hi:
        raise DomainError(f"need 0 < lo < hi, got ({lo}, {hi})")
    axis = np.geomspace(lo, hi, count)
    return np.meshgrid(axis, axis)


def check_envelope(kernel: CoagulationKernel,
                   lo: float = 1e-6, hi: float = 1e6, count: int = 200,
                   rel_slack: float = 1e-12) -> EnvelopeReport:
    """Sample the kernel against its certificate on a log-spaced pair grid.

    A pair violates when rate > bound * (1 + rel_slack); the slack only
    absorbs roundoff, not genuine excess.
    """
    X, Y = log_pair_grid(lo, hi, count)
    rate = np.asarray(kernel.rate(X, Y), dtype=float)
    bound = kernel.certificate.bound(X, Y)
    bad = rate > bound * (1.0 + rel_slack)
    violations = [
        EnvelopeViolation(float(X[i]), float(Y[i]), float(rate[i]), float(bound[i]))
        for i in zip(*np.nonzero(bad))
    ]
    if violations:
        logger.info("envelope check for %s: %d violations in %d samples",
                    kernel.name, len(violations), rate.size)
    return EnvelopeReport(kernel.name, kernel.certificate, int(rate.size), violations)


# --------------------------------------------------------------------------
# breakup models


def derive_selection(production: RateFn, parent: float,
                     rule: GradedRule = DEFAULT_RULE) -> float:
    """Breakup frequency of a parent: its mass-weighted production integral.

    S(parent) = (1/parent) * integral_0^parent x * production(parent, x) dx
    """
    if not parent > 0.0:
        raise DomainError(f"parent size must be positive, got {parent}")
    val = integrate_graded(lambda x: x * np.asarray(production(parent, x), dtype=float),
                           0.0, parent, rule)
    return val / parent


def derive_breakage(production: RateFn, selection: Callable[[float], float]) -> RateFn:
    """Per-event fragment distribution b(x, parent) = production / selection.

    The result vanishes for x >= parent.  Evaluating it where the selection
    frequency is zero while production is not raises ModelError: such a
    model claims fragments appear from parents that never break.
    """

    def breakage(x, parent):
        x = np.asarray(x, dtype=float)
        p = float(parent)
        if not p > 0.0:
            raise DomainError(f"parent size must be positive, got {parent}")
        s = float(selection(p))
        raw = np.where(x < p, np.asarray(production(p, np.minimum(x, p * (1 - 1e-16))), dtype=float), 0.0)
        if s == 0.0:
            if np.any(raw != 0.0):
                raise ModelError(
                    f"production is nonzero at parent {p} but the selection rate is zero"
                )
            return raw * 0.0 if raw.ndim else 0.0
        out = raw / s
        return float(out) if np.ndim(out) == 0 else out

    return breakage


@dataclass(frozen=True)
class BreakageCheck:
    parent: float
    count: float
    mass: float

    @property
    def mass_defect(self) -> float:
        return abs(self.mass - self.parent) / self.parent


def validate_breakage(breakage: RateFn, parent: float,
                      rule: GradedRule = DEFAULT_RULE) -> BreakageCheck:
    """Integrate the fragment distribution: count and recovered parent mass.

    Per breakup event the distribution must return the full parent mass and
    a size-independent mean fragment count; callers compare against those
    targets.
    """
    if not parent > 0.0:
        raise DomainError(f"parent size must be positive, got {parent}")
    count = integrate_graded(lambda x: np.asarray(breakage(x, parent), dtype=float),
                             0.0, parent, rule)
    mass = integrate_graded(lambda x: x * np.asarray(breakage(x, parent), dtype=float),
                            0.0, parent, rule)
    return BreakageCheck(parent, count, mass)


@dataclass(frozen=True)
class FragmentationModel:
    """Breakup model: production density plus derived per-event quantities.

    production        rate density production(parent, x), fragments x < parent
    selection         breakup frequency S(parent)
    breakage          per-event fragment distribution b(x, parent)
    fragment_count    mean fragments per event (>= 1, size-independent)
    selection_growth  exponent with S(parent) <= parent**selection_growth
    cell_integrals    optional closed form (lo, hi, parent) -> (count, mass)
                      of the breakage over [lo, hi]; exactness here is what
                      makes the sectional scheme conserve mass through breakup
    """

    name: str
    production: RateFn
    selection: Callable[[float], float]
    breakage: RateFn
    fragment_count: float
    selection_growth: float
    cell_integrals: Callable | None = None

    def __post_init__(self) -> None:
        if not self.fragment_count >= 1.0:
            raise DomainError(
                f"mean fragment count must be >= 1, got {self.fragment_count}"
            )


@dataclass(frozen=True)
class PowerLawFragmentation(FragmentationModel):
    """Power-law family member; keeps its exponent so certification can use
    closed forms instead of quadrature."""

    exponent: float = 0.0


def power_law_fragmentation(exponent: float, selection_growth: float) -> PowerLawFragmentation:
    """Power-law breakup family.

    production(parent, x) = (exponent+2) * x**exponent * parent**(selection_growth-exponent-1)

    which yields S(parent) = parent**selection_growth, a per-event fragment
    distribution (exponent+2) * x**exponent / parent**(exponent+1), and mean
    count (exponent+2)/(exponent+1).
    """
    problems = []
    if not exponent > -1.0:
        problems.append(
            f"fragment-size exponent must exceed -1 (finite fragment count), got {exponent}"
        )
    if not 0.0 < selection_growth <= 1.0:
        problems.append(
            f"selection growth exponent must lie in (0, 1], got {selection_growth}"
        )
    if problems:
        raise DomainError("; ".join(problems))

    a = float(exponent)
    g = float(selection_growth)

    def production(parent, x):
        x = np.asarray(x, dtype=float)
        return (a + 2.0) * x ** a * parent ** (g - a - 1.0)

    def selection(parent):
        out = np.asarray(parent, dtype=float) ** g
        return float(out) if np.ndim(out) == 0 else out

    def breakage(x, parent):
        x = np.asarray(x, dtype=float)
        p = float(parent)
        out = np.where(x < p, (a + 2.0) * x ** a * p ** (-(a + 1.0)), 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def cell_integrals(lo, hi, parent):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        p = float(parent)
        count = (a + 2.0) / (a + 1.0) * (hi ** (a + 1.0) - lo ** (a + 1.0)) / p ** (a + 1.0)
        mass = (hi ** (a + 2.0) - lo ** (a + 2.0)) / p ** (a + 1.0)
        return count, mass

    return PowerLawFragmentation(
        name=f"powerlaw(exponent={a}, selection_growth={g})",
        production=production,
        selection=selection,
        breakage=breakage,
        fragment_count=(a + 2.0) / (a + 1.0),
        selection_growth=g,
        cell_integrals=cell_integrals,
        exponent=a,
    )


@dataclass(frozen=True)
class FragmentationCertificate:
    """Integrability constants of a breakup model against a kernel singularity.

    fines_constant bounds the weighted fragment count:

        integral_0^p b(x, p) x**(-2*singularity) dx <= fines_constant * p**(-2*singularity)

    and (q, tail_*) certify q-th power integrability of the fragment
    distribution, plain and with the x**(-q*singularity) weight:

        integral b**q dx              <= tail_coef_plain    * p**(q*tail_exp_plain)
        integral x**(-q*s) * b**q dx  <= tail_coef_weighted * p**(q*tail_exp_weighted)

    with both tail exponents inside [-2*singularity - selection_growth,
    1 - selection_growth].  Violations list whatever could not be certified.
    """

    singularity: float
    fines_constant: float | None
    q: float | None
    tail_exp_plain: float | None
    tail_coef_plain: float | None
    tail_exp_weighted: float | None
    tail_coef_weighted: float | None
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def certify_fragmentation(model: FragmentationModel, singularity: float,
                          parents: np.ndarray | None = None,
                          rule: GradedRule = DEFAULT_RULE,
                          q_candidates: tuple[float, ...] = (2.0, 1.5, 1.25, 1.1, 1.05),
                          ) -> FragmentationCertificate:
    """Certify the breakup model's integrability constants at a singularity.

    The power-law family is handled in closed form (constants and the
    largest workable q are exact); generic models are certified by sampling
    parents across decades and fitting majorizing constants.
    """
    if not 0.0 <= singularity <= 0.5:
        raise DomainError(
            f"singularity must lie in [0, 1/2] for certification, got {singularity}"
        )
    s = float(singularity)
    theta = model.selection_growth
    lo_exp = -2.0 * s - theta
    hi_exp = 1.0 - theta
    violations: list[str] = []

    if isinstance(model, PowerLawFragmentation):
        a = model.exponent
        fines = None
        if a + 1.0 > 2.0 * s:
            fines = (a + 2.0) / (a + 1.0 - 2.0 * s)
        else:
            violations.append(
                "fines moment diverges: fragment exponent "
                f"{a} needs exponent + 1 > 2*singularity = {2 * s}"
            )
        # largest q > 1 satisfying integrability and the exponent window
        caps = [2.0]
        if a < 0.0:
            caps.append(0.999 / (-a))
        if a - s < 0.0:
            caps.append(0.999 / (s - a))
        if 1.0 - s - theta > 0.0:
            caps.append(1.0 / (1.0 - s - theta))
        q = min(caps)
        if q <= 1.0:
            violations.append(
                f"no q > 1 certifies the q-power tails (caps give q = {q:.4g})"
            )
            return FragmentationCertificate(s, fines, None, None, None, None, None, violations)
        t1 = 1.0 / q - 1.0
        t2 = 1.0 / q - 1.0 - s
        b1 = (a + 2.0) ** q / (q * a + 1.0)
        b2 = (a + 2.0) ** q / (q * (a - s) + 1.0)
        for tag, t in (("plain", t1), ("weighted", t2)):
            if not lo_exp <= t <= hi_exp + 1e-12:
                violations.append(
                    f"{tag} tail exponent {t:.4g} falls outside [{lo_exp:.4g}, {hi_exp:.4g}]"
                )
        return FragmentationCertificate(s, fines, q, t1, b1, t2, b2, violations)

    # generic model: sample and majorize
    if parents is None:
        parents = np.geomspace(1e-2, 1e3, 11)
    parents = np.asarray(parents, dtype=float)
    if np.any(parents <= 0.0):
        raise DomainError("sample parents must be positive")

    def weighted_integral(p: float, power: float, weight: float) -> float:
        return integrate_graded(
            lambda x: np.asarray(model.breakage(x, p), dtype=float) ** power
            * x ** weight, 0.0, p, rule)

    fines = None
    try:
        vals = [weighted_integral(p, 1.0, -2.0 * s) * p ** (2.0 * s) for p in parents]
        fines = float(max(vals))
    except QuadratureError as exc:
        violations.append(f"fines moment diverges: {exc}")

    chosen = None
    for q in q_candidates:
        try:
            plain = np.array([weighted_integral(p, q, 0.0) for p in parents])
            weighted = np.array([weighted_integral(p, q, -q * s) for p in parents])
        except QuadratureError:
            continue
        logp = np.log(parents)
        fits = []
        admissible = True
        for vals in (plain, weighted):
            slopes = np.diff(np.log(vals)) / np.diff(logp)
            t = float(np.max(slopes)) / q
            if not lo_exp <= t <= hi_exp + 1e-9:
                admissible = False
                break
            coef = float(np.max(vals / parents ** (q * t)))
            fits.append((t, coef))
        if admissible:
            chosen = (q, fits)
            break
    if chosen is None:
        violations.append(
            "no sampled q certified the q-power tails inside the exponent window"
        )
        return FragmentationCertificate(s, fines, None, None, None, None, None, violations)
    q, ((t1, b1), (t2, b2)) = chosen
    return FragmentationCertificate(s, fines, q, t1, b1, t2, b2, violations)
