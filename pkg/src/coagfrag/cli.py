"""Batch command line interface.

Subcommands: run (integrate a configured scenario and emit CSV/JSON
artifacts), verify-kernel (certificate checks), converge (window-growth
study), oracle-test (benchmark residual certifications).

Exit codes: 0 all asserted bounds hold, 1 a bound was violated, 2 the
config is invalid, 3 the integration failed numerically.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, parse_config
from .convergence import run_truncation_sequence, uniqueness_probe
from .diagnostics import DiagnosticsReport, compute_report
from .discretization import Grid, State
from .errors import (ConfigError, DomainError, GridError, ModelError,
                     NumericError, SolverError)
from .integrator import Trajectory, run
from .kernels import (BUILTIN_KERNELS, EnvelopeReport, certify_fragmentation,
                      check_envelope, validate_breakage)
from .oracles import (CertificationReport, ConstantKernelBenchmark,
                      LinearBreakupBenchmark, certify_benchmark)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_BOUND = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

CSV_HEADER = ("t", "M0", "M1", "M_neg2sigma", "Ynorm", "L_envelope",
              "tail_R", "tail_value", "modulus_pair", "modulus_measured",
              "modulus_bound")

_BREAKAGE_PARENTS = (0.1, 1.0, 10.0, 100.0, 1000.0)
_BREAKAGE_RTOL = 1e-8


def _fmt(value: float) -> str:
    """Shortest-roundtrip decimal text; identical input bits give identical text."""
    return repr(float(value))


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _report_config_error(exc: ConfigError) -> int:
    for problem in exc.errors:
        print(f"config error: {problem}", file=sys.stderr)
    return EXIT_CONFIG


# --------------------------------------------------------------------------
# artifact writers


def write_timeseries(report: DiagnosticsReport, path: Path) -> None:
    """One CSV row per snapshot; modulus columns describe the step ending
    at that row and stay empty on the first row."""
    lines = [",".join(CSV_HEADER)]
    for i, row in enumerate(report.rows):
        cells = [
            _fmt(row.t), _fmt(row.number), _fmt(row.mass),
            _fmt(row.fines_moment), _fmt(row.ynorm),
            _fmt(row.envelope_bound), _fmt(row.tail_radius),
            _fmt(row.tail_value),
        ]
        if 0 < i <= len(report.modulus):
            check = report.modulus[i - 1]
            cells += [f"{_fmt(check.t0)}->{_fmt(check.t1)}",
                      _fmt(check.measured), _fmt(check.bound)]
        else:
            cells += ["", "", ""]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def save_snapshots(trajectory: Trajectory, path: Path) -> None:
    payload = {
        "scenario": trajectory.scenario.name,
        "snapshots": [
            {
                "t": s.t,
                "edges": [float(e) for e in s.grid.edges],
                "counts": [float(c) for c in s.counts],
            }
            for s in trajectory.states
        ],
    }
    _write_json(payload, path)


def load_snapshots(path: str | Path) -> list[State]:
    """Reload saved snapshots; reloaded states compare equal to the originals."""
    data = json.loads(Path(path).read_text())
    return [
        State(Grid(np.asarray(s["edges"], dtype=float)), float(s["t"]),
              np.asarray(s["counts"], dtype=float))
        for s in data["snapshots"]
    ]


def dump_rhs(trajectory: Trajectory, path: Path) -> None:
    """Evaluate the rate breakdown at every stored snapshot."""
    assembler = trajectory.scenario.build_assembler()
    pivots = [float(p) for p in trajectory.scenario.grid.pivots]
    entries = []
    for state in trajectory.states:
        parts = assembler.assemble(state)
        entries.append({
            "t": state.t,
            "birth_coag": [float(v) for v in parts.birth_coag],
            "death_coag": [float(v) for v in parts.death_coag],
            "birth_frag": [float(v) for v in parts.birth_frag],
            "death_frag": [float(v) for v in parts.death_frag],
            "total": [float(v) for v in parts.total()],
        })
    _write_json({"scenario": trajectory.scenario.name, "pivots": pivots,
                 "rhs": entries}, path)


def write_distance_table(study, path: Path) -> None:
    lines = ["n_low,n_high,t,gap"]
    for (n_lo, n_hi), gaps in zip(zip(study.ns, study.ns[1:]), study.pair_gaps):
        ts = [t for t in study.snapshots if t > 0.0] or list(study.snapshots)
        for t, gap in zip(ts, gaps):
            lines.append(f"{_fmt(n_lo)},{_fmt(n_hi)},{_fmt(t)},{_fmt(gap)}")
    path.write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# subcommands


def _envelope_entry(report: EnvelopeReport) -> dict:
    entry = {
        "kernel": report.kernel,
        "scale": report.certificate.scale,
        "growth": report.certificate.growth,
        "singularity": report.certificate.singularity,
        "samples": report.samples,
        "ok": report.ok,
        "violations": [
            {"x": v.x, "y": v.y, "rate": v.rate, "bound": v.bound}
            for v in report.violations[:10]
        ],
        "violation_count": len(report.violations),
    }
    return entry


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        return _report_config_error(exc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        trajectory = run(cfg.scenario)
    except (DomainError, GridError, ModelError) as exc:
        _fail(str(exc))
        return EXIT_CONFIG
    except NumericError as exc:
        _fail(str(exc))
        return EXIT_NUMERIC
    diag = cfg.diagnostics
    try:
        report = compute_report(
            trajectory, epsilon=diag.epsilon, tail_radius=diag.tail_radius,
            delta=diag.delta, window=diag.window,
        )
    except ModelError as exc:
        _fail(str(exc))
        return EXIT_CONFIG
    payload = report.to_dict()
    probe_ok = True
    if diag.uniqueness_probe:
        try:
            probe = uniqueness_probe(cfg.scenario, rtol=diag.probe_rtol)
        except NumericError as exc:
            _fail(str(exc))
            return EXIT_NUMERIC
        probe_ok = probe.within(diag.probe_tolerance)
        payload["uniqueness_probe"] = probe.to_dict()
        payload["uniqueness_probe"]["tolerance"] = diag.probe_tolerance
        payload["uniqueness_probe"]["ok"] = probe_ok
        for warning in probe.warnings:
            logger.warning("%s", warning)
    write_timeseries(report, out / "timeseries.csv")
    save_snapshots(trajectory, out / "snapshots.json")
    _write_json(payload, out / "report.json")
    if args.dump_rhs:
        dump_rhs(trajectory, out / "rhs.json")
    if not trajectory.completed:
        _fail(f"integration stopped early: {trajectory.failure}")
        return EXIT_NUMERIC
    if not (report.ok and probe_ok):
        _fail("one or more certified bounds were violated; see report.json")
        return EXIT_BOUND
    logger.info("run %s finished: %d snapshots, all bounds hold",
                cfg.scenario.name, len(report.rows))
    return EXIT_OK


def cmd_verify_kernel(args: argparse.Namespace) -> int:
    cfg: RunConfig | None = None
    if args.config:
        try:
            cfg = parse_config(args.config)
        except ConfigError as exc:
            return _report_config_error(exc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg is None:
        kernels = [BUILTIN_KERNELS[name] for name in sorted(BUILTIN_KERNELS)]
    else:
        kernels = [cfg.scenario.kernel] if cfg.scenario.kernel else []
    entries = [_envelope_entry(check_envelope(k)) for k in kernels]
    ok = all(e["ok"] for e in entries)

    frag_entry = None
    model = cfg.scenario.fragmentation if cfg else None
    if model is not None:
        singularity = cfg.scenario.singularity
        cert = certify_fragmentation(model, singularity)
        checks = []
        for parent in _BREAKAGE_PARENTS:
            chk = validate_breakage(model.breakage, parent)
            count_err = abs(chk.count - model.fragment_count) / model.fragment_count
            checks.append({
                "parent": chk.parent, "count": chk.count, "mass": chk.mass,
                "mass_defect": chk.mass_defect, "count_error": count_err,
            })
        breakage_ok = all(
            c["mass_defect"] <= _BREAKAGE_RTOL and c["count_error"] <= _BREAKAGE_RTOL
            for c in checks
        )
        frag_entry = {
            "model": model.name,
            "singularity": singularity,
            "ok": cert.ok and breakage_ok,
            "fines_constant": cert.fines_constant,
            "q": cert.q,
            "tail_exp_plain": cert.tail_exp_plain,
            "tail_coef_plain": cert.tail_coef_plain,
            "tail_exp_weighted": cert.tail_exp_weighted,
            "tail_coef_weighted": cert.tail_coef_weighted,
            "violations": list(cert.violations),
            "breakage": checks,
        }
        ok = ok and frag_entry["ok"]

    _write_json({"kernels": entries, "fragmentation": frag_entry, "ok": ok},
                out / "kernel_report.json")
    if not ok:
        _fail("certificate verification failed; see kernel_report.json")
        return EXIT_BOUND
    return EXIT_OK


def _parse_ns(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError([f"--ns: expected comma-separated numbers, got {text!r}"]) from exc
    if not values:
        raise ConfigError([f"--ns: expected comma-separated numbers, got {text!r}"])
    return values


def cmd_converge(args: argparse.Namespace) -> int:
    try:
        cfg = parse_config(args.config)
        ns = _parse_ns(args.ns) if args.ns else cfg.convergence.ns
    except ConfigError as exc:
        return _report_config_error(exc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sc = cfg.scenario
    conv = cfg.convergence
    try:
        study = run_truncation_sequence(
            ns,
            kernel=sc.kernel,
            fragmentation=sc.fragmentation,
            initial=sc.initial,
            horizon=sc.horizon,
            snapshots=sc.snapshots,
            octaves_below=conv.octaves_below,
            cells_per_octave=conv.cells_per_octave,
            method=sc.method,
            rtol=sc.rtol,
            lower_cutoff=sc.truncation.lower_cutoff,
            threads=args.threads,
        )
    except (DomainError, GridError, ModelError) as exc:
        _fail(str(exc))
        return EXIT_CONFIG
    except NumericError as exc:
        _fail(str(exc))
        return EXIT_NUMERIC
    payload = study.to_dict()
    payload["final_gap_rtol"] = conv.final_gap_rtol
    passed = (study.completed and study.decreasing
              and study.final_gap_rel <= conv.final_gap_rtol)
    payload["ok"] = passed
    _write_json(payload, out / "convergence.json")
    write_distance_table(study, out / "distances.csv")
    if not study.completed:
        _fail("one or more window runs failed; see convergence.json")
        return EXIT_NUMERIC
    if not passed:
        _fail("window-growth gaps did not certify; see convergence.json")
        return EXIT_BOUND
    return EXIT_OK


def cmd_oracle_test(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports: list[CertificationReport] = [
        certify_benchmark(ConstantKernelBenchmark()),
        certify_benchmark(LinearBreakupBenchmark()),
    ]
    tol = 1e-6
    entries = [
        {"benchmark": r.benchmark, "points": r.points,
         "max_rel_residual": r.max_rel_residual, "ok": r.passed(tol)}
        for r in reports
    ]
    ok = all(e["ok"] for e in entries)
    _write_json({"tolerance": tol, "benchmarks": entries, "ok": ok},
                out / "oracle_report.json")
    if not ok:
        worst = max(e["max_rel_residual"] for e in entries)
        _fail(f"oracle residuals exceed {tol:g} (worst {worst:.3e})")
        return EXIT_BOUND
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coagfrag",
        description="Sectional solver for coagulation with multifragmentation "
                    "under singular collision kernels.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser, *, config_required: bool) -> None:
        p.add_argument("--config", required=config_required, default=None,
                       help="TOML scenario configuration")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for concurrent runs")

    p_run = sub.add_parser("run", help="integrate a scenario and emit artifacts")
    common(p_run, config_required=True)
    p_run.add_argument("--dump-rhs", action="store_true",
                       help="also dump the rate breakdown at each snapshot")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify-kernel",
                              help="check envelope and breakup certificates")
    common(p_verify, config_required=False)
    p_verify.set_defaults(func=cmd_verify_kernel)

    p_conv = sub.add_parser("converge", help="window-growth convergence study")
    common(p_conv, config_required=True)
    p_conv.add_argument("--ns", default=None,
                        help="comma-separated window bounds, e.g. 25,50,100,200")
    p_conv.set_defaults(func=cmd_converge)

    p_oracle = sub.add_parser("oracle-test",
                              help="residual certification of the benchmarks")
    common(p_oracle, config_required=False)
    p_oracle.set_defaults(func=cmd_oracle_test)
    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("SOLVER_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _report_config_error(exc)
    except NumericError as exc:
        _fail(str(exc))
        return EXIT_NUMERIC
    except SolverError as exc:
        _fail(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
