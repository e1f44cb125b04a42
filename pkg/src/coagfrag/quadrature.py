"""Composite Gauss-Legendre quadrature on geometrically graded panels.

Breakup densities and weighted moments involve integrands that blow up
(integrably) at the origin, e.g. x**a with a in (-1, 0).  A fixed rule
wastes nodes there; instead the interval is tiled with panels whose widths
shrink geometrically toward the singular endpoint, each panel integrated
with a short Gauss rule.  The panel sums of a pure power form a geometric
series, so the leftover tail can be extrapolated from the last two panel
contributions, and a sustained non-decaying panel sequence (growth can be
transient while the panels cross a bump) is the divergence signal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, QuadratureError

_NODE_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _NODE_CACHE:
        _NODE_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _NODE_CACHE[order]


@dataclass(frozen=True)
class GradedRule:
    """Parameters of the graded composite rule.

    rtol        relative tolerance on the accumulated integral
    nodes       Gauss-Legendre order per panel
    shrink      geometric factor between consecutive panel widths, in (0, 1)
    max_panels  hard cap before the rule gives up
    """

    rtol: float = 1e-10
    nodes: int = 16
    shrink: float = 0.5
    max_panels: int = 4000

    def __post_init__(self) -> None:
        if not 0.0 < self.shrink < 1.0:
            raise DomainError(f"panel shrink factor must be in (0, 1), got {self.shrink}")
        if self.nodes < 2:
            raise DomainError(f"need at least 2 Gauss nodes, got {self.nodes}")
        if self.rtol <= 0.0:
            raise DomainError(f"quadrature rtol must be positive, got {self.rtol}")


DEFAULT_RULE = GradedRule()

# consecutive non-decaying panels tolerated before declaring divergence;
# geometric panels cross any fixed feature in O(log) panels, so a genuine
# bump cannot stall the decay this long
_DIVERGENCE_PATIENCE = 40


def gauss_panel(f: Callable, a: float, b: float, nodes: int = 16) -> float:
    """Gauss-Legendre quadrature of ``f`` on the single panel [a, b]."""
    if not b > a:
        raise DomainError(f"panel must satisfy a < b, got [{a}, {b}]")
    z, w = _gauss_nodes(nodes)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    vals = np.asarray(f(mid + half * z), dtype=float)
    return float(half * np.dot(w, vals))


def integrate_graded(f: Callable, a: float, b: float, rule: GradedRule = DEFAULT_RULE) -> float:
    """Integrate ``f`` over (a, b] where ``f`` may diverge integrably at ``a``.

    Panels march from ``b`` toward ``a`` with geometrically shrinking widths.
    Once the panel contributions decay geometrically the remaining tail is
    extrapolated and added.  Raises QuadratureError when the contributions
    stop decaying (non-integrable endpoint) or the panel budget runs out.
    """
    if not np.isfinite(a) or not np.isfinite(b):
        raise DomainError(f"finite bounds required, got [{a}, {b}]")
    if not b > a:
        raise DomainError(f"integration bounds must satisfy a < b, got [{a}, {b}]")

    total = 0.0
    comp = 0.0  # Neumaier carry so thousands of tiny panels do not lose digits
    prev_contrib = np.inf
    stalled = 0
    hi = b
    span = b - a
    for k in range(rule.max_panels):
        lo = a + span * rule.shrink ** (k + 1)
        if hi - lo <= abs(hi) * 1e-16:
            # panel width has hit float resolution next to the endpoint
            return total + comp
        contrib = gauss_panel(f, lo, hi, rule.nodes)
        if not np.isfinite(contrib):
            raise QuadratureError(
                f"non-finite panel contribution on [{lo:.3e}, {hi:.3e}]"
            )
        t = total + contrib
        if abs(total) >= abs(contrib):
            comp += (total - t) + contrib
        else:
            comp += (contrib - t) + total
        total = t
        scale = max(abs(total + comp), 1e-300)
        ratio = abs(contrib) / max(abs(prev_contrib), 1e-300)
        if abs(contrib) >= abs(prev_contrib) > scale * rule.rtol:
            stalled += 1
            if stalled >= _DIVERGENCE_PATIENCE:
                raise QuadratureError(
                    f"panel contributions do not decay toward {a} "
                    f"(last two: {prev_contrib:.3e}, {contrib:.3e}); "
                    "integrand looks non-integrable"
                )
        else:
            stalled = 0
        if k >= 1 and ratio < 0.999:
            tail = abs(contrib) * ratio / (1.0 - ratio)
            if abs(contrib) + tail <= scale * rule.rtol:
                # geometric extrapolation of the unreached tail
                sign = 1.0 if contrib >= 0 else -1.0
                return total + comp + sign * tail
        prev_contrib = contrib
        hi = lo
    raise QuadratureError(
        f"no convergence after {rule.max_panels} panels on ({a}, {b}]"
    )


def integrate_decaying(f: Callable, a: float, rule: GradedRule = DEFAULT_RULE,
                       growth: float = 2.0) -> float:
    """Integrate ``f`` over [a, inf) for an eventually decaying integrand.

    Panels grow geometrically until their contribution is negligible
    relative to the running total.
    """
    if a <= 0.0:
        raise DomainError(f"lower bound must be positive, got {a}")
    total = 0.0
    lo = a
    prev_contrib = np.inf
    stalled = 0
    for k in range(rule.max_panels):
        hi = lo * growth
        contrib = gauss_panel(f, lo, hi, rule.nodes)
        if not np.isfinite(contrib):
            raise QuadratureError(
                f"non-finite panel contribution on [{lo:.3e}, {hi:.3e}]"
            )
        total += contrib
        scale = max(abs(total), 1e-300)
        if abs(contrib) >= abs(prev_contrib) > scale * rule.rtol:
            stalled += 1
            if stalled >= _DIVERGENCE_PATIENCE:
                raise QuadratureError(
                    "panel contributions grow toward infinity; integrand does not decay"
                )
        else:
            stalled = 0
        if k >= 1 and abs(contrib) <= scale * rule.rtol and abs(prev_contrib) <= scale * rule.rtol:
            return total
        prev_contrib = contrib
        lo = hi
    raise QuadratureError(f"no convergence after {rule.max_panels} panels on [{a}, inf)")
