"""Ready-made scenarios used by the CLI examples and the acceptance tests."""

from __future__ import annotations

import numpy as np

from .discretization import build_grid
from .integrator import Scenario
from .kernels import CONSTANT, SMOLUCHOWSKI, power_law_fragmentation
from .truncation import TruncationParams


def exponential_initial(scale: float = 1.0, amplitude: float = 1.0):
    """Density amplitude * exp(-x / scale)."""
    return lambda x: amplitude * np.exp(-np.asarray(x, dtype=float) / scale)


def gamma_initial(power: float = 1.0, scale: float = 1.0, amplitude: float = 1.0):
    """Density amplitude * x**power * exp(-x / scale)."""
    def u0(x):
        x = np.asarray(x, dtype=float)
        return amplitude * x ** power * np.exp(-x / scale)
    return u0


def default_x_min(n: float, singularity: float) -> float:
    """Grid floor: the pair cutoff when the kernel is singular (no dead
    cells below it), otherwise four decades below the window bound."""
    if singularity > 0.0:
        return min(singularity / n, 1e-4 * n)
    return 1e-4 * n


def constant_kernel_case(cells: int = 240, x_min: float = 1e-4, n: float = 1e3,
                         horizon: float = 2.0,
                         snapshots: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0),
                         rtol: float = 1e-6) -> Scenario:
    """Unit-rate pure coagulation from exp(-x); benchmarked by closed form."""
    return Scenario(
        grid=build_grid(x_min, n, cells),
        truncation=TruncationParams(n, singularity=0.0),
        initial=exponential_initial(),
        horizon=horizon,
        kernel=CONSTANT,
        snapshots=snapshots,
        rtol=rtol,
        name="constant_kernel",
    )


def linear_breakup_case(cells: int = 200, x_min: float = 1e-4, n: float = 50.0,
                        horizon: float = 1.0,
                        snapshots: tuple[float, ...] = (0.0, 0.5, 1.0),
                        rtol: float = 1e-6) -> Scenario:
    """Pure breakup with S(x) = x into two uniform fragments, from exp(-x)."""
    return Scenario(
        grid=build_grid(x_min, n, cells),
        truncation=TruncationParams(n, singularity=0.0),
        initial=exponential_initial(),
        horizon=horizon,
        fragmentation=power_law_fragmentation(0.0, 1.0),
        snapshots=snapshots,
        rtol=rtol,
        name="linear_breakup",
    )


def smoluchowski_powerlaw_case(cells: int = 150, n: float = 100.0,
                               x_min: float | None = None,
                               alpha: float = 0.5, selection_growth: float = 0.5,
                               horizon: float = 1.0,
                               snapshots: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0),
                               rtol: float = 1e-6) -> Scenario:
    """Singular coagulation plus power-law breakup, from x*exp(-x)."""
    sing = SMOLUCHOWSKI.certificate.singularity
    if x_min is None:
        x_min = default_x_min(n, sing)
    return Scenario(
        grid=build_grid(x_min, n, cells),
        truncation=TruncationParams(n, singularity=sing),
        initial=gamma_initial(power=1.0),
        horizon=horizon,
        kernel=SMOLUCHOWSKI,
        fragmentation=power_law_fragmentation(alpha, selection_growth),
        snapshots=snapshots,
        rtol=rtol,
        name="smoluchowski_powerlaw",
    )


def shipped_scenarios() -> dict[str, Scenario]:
    """The cases every bound in the diagnostics suite is exercised on."""
    cases = (constant_kernel_case(), linear_breakup_case(), smoluchowski_powerlaw_case())
    return {c.name: c for c in cases}
