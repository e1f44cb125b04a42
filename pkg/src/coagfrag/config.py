"""Config-file ingestion.

TOML in, fully validated RunConfig out.  Validation is eager and
accumulating: every problem in the file is reported in one pass, each
message prefixed with the config-key path that caused it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from .discretization import build_grid
from .errors import ConfigError, DomainError, GridError, ModelError
from .integrator import Scenario
from .kernels import (BUILTIN_KERNELS, CoagulationKernel, EnvelopeCertificate,
                      FragmentationModel, power_law_fragmentation)
from .scenarios import default_x_min, exponential_initial, gamma_initial
from .truncation import TruncationParams

logger = logging.getLogger(__name__)

_KERNEL_CHOICES = tuple(sorted(BUILTIN_KERNELS)) + ("none",)


@dataclass(frozen=True)
class DiagnosticsSettings:
    epsilon: float = 0.1
    tail_radius: float | None = None
    delta: float = 0.01
    window: float = 1.0
    uniqueness_probe: bool = False
    probe_rtol: float = 1e-8
    probe_tolerance: float = 5e-3


@dataclass(frozen=True)
class ConvergenceSettings:
    ns: tuple[float, ...] = (25.0, 50.0, 100.0, 200.0)
    cells_per_octave: int = 8
    octaves_below: int = 14
    final_gap_rtol: float = 1e-3


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    diagnostics: DiagnosticsSettings
    convergence: ConvergenceSettings
    raw: dict = field(repr=False)


class _Section:
    """Typed reads from one config table, accumulating path-tagged errors."""

    def __init__(self, data: dict, path: str, errors: list[str]):
        self.data = dict(data)
        self.path = path
        self.errors = errors

    def _tag(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def complain(self, key: str, message: str) -> None:
        self.errors.append(f"{self._tag(key)}: {message}")

    def finish(self) -> None:
        for key in sorted(self.data):
            self.complain(key, "unknown key")

    def number(self, key: str, default: float | None, *, minimum: float | None = None,
               exclusive: bool = False, allow_none: bool = False) -> float | None:
        if key not in self.data:
            return default
        value = self.data.pop(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.complain(key, f"expected a number, got {value!r}")
            return default
        value = float(value)
        if not math.isfinite(value):
            self.complain(key, f"must be finite, got {value}")
            return default
        if minimum is not None:
            if exclusive and not value > minimum:
                self.complain(key, f"must be > {minimum}, got {value}")
                return default
            if not exclusive and not value >= minimum:
                self.complain(key, f"must be >= {minimum}, got {value}")
                return default
        return value

    def integer(self, key: str, default: int | None, *, minimum: int = 1) -> int | None:
        if key not in self.data:
            return default
        value = self.data.pop(key)
        if isinstance(value, bool) or not isinstance(value, int):
            self.complain(key, f"expected an integer, got {value!r}")
            return default
        if value < minimum:
            self.complain(key, f"must be >= {minimum}, got {value}")
            return default
        return value

    def string(self, key: str, default: str | None,
               choices: tuple[str, ...] | None = None) -> str | None:
        if key not in self.data:
            return default
        value = self.data.pop(key)
        if not isinstance(value, str):
            self.complain(key, f"expected a string, got {value!r}")
            return default
        if choices is not None and value not in choices:
            self.complain(key, f"must be one of {list(choices)}, got {value!r}")
            return default
        return value

    def boolean(self, key: str, default: bool) -> bool:
        if key not in self.data:
            return default
        value = self.data.pop(key)
        if not isinstance(value, bool):
            self.complain(key, f"expected true/false, got {value!r}")
            return default
        return value

    def numbers(self, key: str, default: tuple[float, ...] | None) -> tuple[float, ...] | None:
        if key not in self.data:
            return default
        value = self.data.pop(key)
        if not isinstance(value, (list, tuple)) or not value or any(
                isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            self.complain(key, f"expected a non-empty list of numbers, got {value!r}")
            return default
        return tuple(float(v) for v in value)


def _table(raw: dict, name: str, errors: list[str]) -> _Section:
    value = raw.get(name, {})
    if not isinstance(value, dict):
        errors.append(f"{name}: expected a table, got {value!r}")
        value = {}
    return _Section(value, name, errors)


def _parse_kernel(raw: dict, errors: list[str]) -> CoagulationKernel | None:
    value = raw.get("kernel", "none")
    if isinstance(value, str):
        if value == "none":
            return None
        if value not in BUILTIN_KERNELS:
            errors.append(f"kernel: must be one of {list(_KERNEL_CHOICES)}, got {value!r}")
            return None
        return BUILTIN_KERNELS[value]
    if not isinstance(value, dict):
        errors.append(f"kernel: expected a name or a table, got {value!r}")
        return None
    sec = _Section(value, "kernel", errors)
    name = sec.string("name", None, choices=tuple(sorted(BUILTIN_KERNELS)))
    if name is None:
        sec.complain("name", "required when kernel is given as a table")
        sec.finish()
        return None
    base = BUILTIN_KERNELS[name]
    # missing certificate fields inherit the shipped certificate
    scale = sec.number("scale", base.certificate.scale, minimum=0.0, exclusive=True)
    growth = sec.number("growth", base.certificate.growth)
    singularity = sec.number("singularity", base.certificate.singularity)
    sec.finish()
    try:
        cert = EnvelopeCertificate(scale, growth, singularity)
    except DomainError as exc:
        errors.append(f"kernel: {exc}")
        return None
    return CoagulationKernel(base.name, base.rate, cert)


def _parse_fragmentation(raw: dict, singularity: float,
                         errors: list[str]) -> FragmentationModel | None:
    value = raw.get("fragmentation", "none")
    if isinstance(value, str):
        if value != "none":
            errors.append(
                f'fragmentation: must be "none" or a table, got {value!r}')
        return None
    if not isinstance(value, dict):
        errors.append(f"fragmentation: expected a name or a table, got {value!r}")
        return None
    sec = _Section(value, "fragmentation", errors)
    family = sec.string("family", "powerlaw", choices=("powerlaw",))
    alpha = sec.number("alpha", None)
    gamma = sec.number("gamma", None)
    sec.finish()
    if family is None:
        return None
    if alpha is None:
        sec.complain("alpha", "required for the powerlaw family")
    if gamma is None:
        sec.complain("gamma", "required for the powerlaw family")
    if alpha is None or gamma is None:
        return None
    if alpha + 1.0 <= 2.0 * singularity:
        sec.complain(
            "alpha",
            f"fines moment diverges: need alpha + 1 > 2*singularity "
            f"(alpha = {alpha}, singularity = {singularity})")
        return None
    try:
        return power_law_fragmentation(alpha, gamma)
    except (DomainError, ModelError) as exc:
        errors.append(f"fragmentation: {exc}")
        return None


def _parse_initial(raw: dict, errors: list[str]):
    sec = _table(raw, "initial", errors)
    family = sec.string("family", "exponential", choices=("exponential", "gamma"))
    scale = sec.number("scale", 1.0, minimum=0.0, exclusive=True)
    amplitude = sec.number("amplitude", 1.0, minimum=0.0, exclusive=True)
    power = sec.number("power", 1.0, minimum=0.0, exclusive=True)
    sec.finish()
    if family == "gamma":
        return gamma_initial(power, scale, amplitude)
    return exponential_initial(scale, amplitude)


def parse_config(source: dict | str | Path) -> RunConfig:
    """Validate a config mapping (or TOML file path) into a RunConfig.

    All validation problems are gathered and raised together as one
    ConfigError so a bad file can be fixed in a single pass.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_file():
            raise ConfigError([f"config file not found: {path}"])
        try:
            with open(path, "rb") as handle:
                raw = tomllib.load(handle)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"config parse error: {exc}"]) from exc
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError([f"config root must be a table, got {type(raw).__name__}"])

    errors: list[str] = []
    known = {"kernel", "fragmentation", "truncation", "grid", "initial",
             "time", "diagnostics", "convergence", "name"}
    for key in sorted(set(raw) - known):
        errors.append(f"{key}: unknown key")

    name = raw.get("name", "run")
    if not isinstance(name, str):
        errors.append(f"name: expected a string, got {name!r}")
        name = "run"

    kernel = _parse_kernel(raw, errors)
    singularity = kernel.certificate.singularity if kernel else 0.0
    fragmentation = _parse_fragmentation(raw, singularity, errors)
    if kernel is None and fragmentation is None and not errors:
        errors.append("kernel: nothing to integrate; give a kernel, a "
                      "fragmentation table, or both")

    trunc_sec = _table(raw, "truncation", errors)
    n = trunc_sec.number("n", 1000.0, minimum=0.0, exclusive=True)
    lower_cutoff = trunc_sec.number("lower_cutoff", None, minimum=0.0)
    trunc_sec.finish()

    grid_sec = _table(raw, "grid", errors)
    cells = grid_sec.integer("cells", 160, minimum=3)
    x_min = grid_sec.number("x_min", None, minimum=0.0, exclusive=True)
    grid_sec.finish()
    if x_min is None:
        x_min = default_x_min(n, singularity)

    initial = _parse_initial(raw, errors)

    time_sec = _table(raw, "time", errors)
    horizon = time_sec.number("horizon", 1.0, minimum=0.0)
    snapshots = time_sec.numbers("snapshots", None)
    method = time_sec.string("method", "rk4", choices=("euler", "rk4"))
    adaptive = time_sec.boolean("adaptive", True)
    rtol = time_sec.number("rtol", 1e-6, minimum=0.0, exclusive=True)
    atol = time_sec.number("atol", 1e-12, minimum=0.0)
    dt = time_sec.number("dt", None, minimum=0.0, exclusive=True)
    dt_min = time_sec.number("dt_min", 1e-12, minimum=0.0, exclusive=True)
    time_sec.finish()

    diag_sec = _table(raw, "diagnostics", errors)
    diagnostics = DiagnosticsSettings(
        epsilon=diag_sec.number("epsilon", 0.1, minimum=0.0, exclusive=True),
        tail_radius=diag_sec.number("tail_radius", None, minimum=1.0, exclusive=True),
        delta=diag_sec.number("delta", 0.01, minimum=0.0, exclusive=True),
        window=diag_sec.number("window", 1.0, minimum=0.0, exclusive=True),
        uniqueness_probe=diag_sec.boolean("uniqueness_probe", False),
        probe_rtol=diag_sec.number("probe_rtol", 1e-8, minimum=0.0, exclusive=True),
        probe_tolerance=diag_sec.number("probe_tolerance", 5e-3, minimum=0.0,
                                        exclusive=True),
    )
    diag_sec.finish()

    conv_sec = _table(raw, "convergence", errors)
    convergence = ConvergenceSettings(
        ns=conv_sec.numbers("ns", (25.0, 50.0, 100.0, 200.0)),
        cells_per_octave=conv_sec.integer("cells_per_octave", 8),
        octaves_below=conv_sec.integer("octaves_below", 14),
        final_gap_rtol=conv_sec.number("final_gap_rtol", 1e-3, minimum=0.0,
                                       exclusive=True),
    )
    conv_sec.finish()
    if convergence.ns is not None:
        if len(convergence.ns) < 3:
            conv_sec.complain("ns", f"need at least 3 values, got {list(convergence.ns)}")
        elif any(b <= a for a, b in zip(convergence.ns, convergence.ns[1:])):
            conv_sec.complain("ns", f"must be strictly ascending, got {list(convergence.ns)}")

    scenario = None
    if not errors:
        try:
            grid = build_grid(x_min, n, cells)
            truncation = TruncationParams(n, singularity=singularity,
                                          lower_cutoff=lower_cutoff)
            scenario = Scenario(
                grid=grid, truncation=truncation, initial=initial,
                horizon=horizon, kernel=kernel, fragmentation=fragmentation,
                snapshots=snapshots, method=method, adaptive=adaptive,
                rtol=rtol, atol=atol, dt=dt, dt_min=dt_min, name=name,
            )
        except (DomainError, GridError, ModelError) as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigError(errors)
    logger.info("config parsed: scenario %r on (%g, %g] with %d cells",
                name, x_min, n, cells)
    return RunConfig(scenario=scenario, diagnostics=diagnostics,
                     convergence=convergence, raw=raw)
