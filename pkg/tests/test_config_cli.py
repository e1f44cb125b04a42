"""Config ingestion and the command-line entry points."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from coagfrag.cli import CSV_HEADER, _parse_ns, load_snapshots, main, save_snapshots
from coagfrag.config import parse_config
from coagfrag.errors import ConfigError
from coagfrag.integrator import run
from coagfrag.scenarios import constant_kernel_case, default_x_min

BASE_CONFIG = """\
kernel = "constant"
[truncation]
n = 50.0
[grid]
cells = 40
x_min = 1e-3
[time]
horizon = 0.2
snapshots = [0.0, 0.1, 0.2]
"""


def _write(tmp_path: Path, text: str, name: str = "case.toml") -> str:
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# --------------------------------------------------------------------------
# config parsing


def test_minimal_config_fills_documented_defaults():
    cfg = parse_config({"kernel": "constant"})
    sc = cfg.scenario
    assert sc.kernel is not None and sc.kernel.name == "constant"
    assert sc.fragmentation is None
    assert sc.truncation.n == 1000.0
    assert sc.grid.cells == 160
    assert sc.grid.x_min == default_x_min(1000.0, 0.0)
    assert sc.horizon == 1.0
    assert sc.snapshots == (0.0, 1.0)
    assert sc.method == "rk4"
    assert sc.adaptive is True
    assert sc.rtol == 1e-6
    assert sc.name == "run"
    assert cfg.diagnostics.epsilon == 0.1
    assert cfg.convergence.ns == (25.0, 50.0, 100.0, 200.0)


def test_singular_kernel_gets_a_floor_below_the_pair_cutoff():
    cfg = parse_config({"kernel": "smoluchowski"})
    sing = cfg.scenario.singularity
    assert sing == pytest.approx(1.0 / 3.0)
    assert cfg.scenario.grid.x_min == default_x_min(1000.0, sing)
    assert cfg.scenario.grid.x_min == pytest.approx(sing / 1000.0)


def test_every_problem_is_reported_in_one_pass():
    bad = {
        "kernel": "eke",
        "fragmentation": {"alpha": -0.5, "gamma": 0.5},  # fines diverge at s=1/2
        "time": {"horizon": -1.0},
        "extra": 1,
        "grid": {"cellz": 10},
    }
    with pytest.raises(ConfigError) as excinfo:
        parse_config(bad)
    errors = excinfo.value.errors
    assert len(errors) == 4
    joined = "\n".join(errors)
    assert "extra" in joined
    assert "fragmentation.alpha" in joined
    assert "grid.cellz" in joined
    assert "time.horizon" in joined


def test_empty_config_has_nothing_to_integrate():
    with pytest.raises(ConfigError, match="nothing to integrate"):
        parse_config({})


def test_kernel_table_overrides_only_the_given_certificate_fields():
    cfg = parse_config({"kernel": {"name": "smoluchowski", "scale": 8.0}})
    cert = cfg.scenario.kernel.certificate
    assert cert.scale == 8.0
    assert cert.growth == pytest.approx(2.0 / 3.0)
    assert cert.singularity == pytest.approx(1.0 / 3.0)


def test_missing_and_malformed_config_files_raise(tmp_path: Path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.toml")
    broken = _write(tmp_path, "not = [valid\n")
    with pytest.raises(ConfigError, match="parse error"):
        parse_config(broken)


def test_convergence_window_list_is_validated():
    with pytest.raises(ConfigError, match="at least 3"):
        parse_config({"kernel": "constant", "convergence": {"ns": [10.0, 20.0]}})
    with pytest.raises(ConfigError, match="ascending"):
        parse_config({"kernel": "constant",
                      "convergence": {"ns": [10.0, 40.0, 20.0]}})


def test_ns_flag_parsing():
    assert _parse_ns("25,50,100") == (25.0, 50.0, 100.0)
    assert _parse_ns("25, 50") == (25.0, 50.0)
    for bad in ("25;50", "", "a,b"):
        with pytest.raises(ConfigError, match="--ns"):
            _parse_ns(bad)


# --------------------------------------------------------------------------
# run subcommand


def test_run_writes_artifacts_and_exits_zero(tmp_path: Path):
    cfg = _write(tmp_path, BASE_CONFIG)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "timeseries.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 4  # header + one row per snapshot
    assert lines[1].endswith(",,")  # no modulus columns on the first row
    assert "->" in lines[2]
    report = json.loads((out / "report.json").read_text())
    assert report["ok"] is True
    assert (out / "snapshots.json").is_file()


def test_repeated_runs_are_byte_identical(tmp_path: Path):
    cfg = _write(tmp_path, BASE_CONFIG)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "a"),
                 "--dump-rhs"]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "b"),
                 "--dump-rhs"]) == 0
    for name in ("timeseries.csv", "snapshots.json", "report.json", "rhs.json"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_violated_bound_exits_one_but_still_writes_artifacts(tmp_path: Path):
    cfg = _write(tmp_path, BASE_CONFIG + "\n[diagnostics]\ntail_radius = 2.0\n")
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 1
    report = json.loads((out / "report.json").read_text())
    assert report["ok"] is False
    assert (out / "timeseries.csv").is_file()


def test_bad_config_exits_two(tmp_path: Path):
    assert main(["run", "--config", str(tmp_path / "nope.toml"),
                 "--out", str(tmp_path / "out")]) == 2
    cfg = _write(tmp_path, "kernel = \"constant\"\n[time]\nhorizon = -1.0\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "out")]) == 2


def test_step_size_collapse_exits_three(tmp_path: Path):
    # an enormous initial population forces dt below the floor immediately
    cfg = _write(tmp_path, BASE_CONFIG + "\n[initial]\namplitude = 1e12\n")
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 3
    # the partial trajectory is still dumped for post-mortem work
    assert (out / "timeseries.csv").is_file()
    assert (out / "report.json").is_file()


def test_rhs_dump_decomposes_the_rate(tmp_path: Path):
    cfg = _write(tmp_path, BASE_CONFIG)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out), "--dump-rhs"]) == 0
    payload = json.loads((out / "rhs.json").read_text())
    assert payload["scenario"] == "run"
    assert len(payload["pivots"]) == 40
    assert len(payload["rhs"]) == 3
    for entry in payload["rhs"]:
        parts = (np.array(entry["birth_coag"]) - np.array(entry["death_coag"])
                 + np.array(entry["birth_frag"]) - np.array(entry["death_frag"]))
        assert np.allclose(parts, entry["total"], rtol=1e-12, atol=1e-15)


def test_probe_flag_adds_a_report_entry(tmp_path: Path):
    cfg = _write(tmp_path, BASE_CONFIG + "\n[diagnostics]\nuniqueness_probe = true\n")
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    probe = report["uniqueness_probe"]
    assert probe["ok"] is True
    assert probe["tolerance"] == 5e-3
    assert probe["sup_distance"] <= 5e-3


def test_snapshots_survive_a_save_load_round_trip(tmp_path: Path):
    scenario = constant_kernel_case(cells=40, x_min=1e-3, n=50.0, horizon=0.2,
                                    snapshots=(0.0, 0.1, 0.2))
    trajectory = run(scenario)
    path = tmp_path / "snapshots.json"
    save_snapshots(trajectory, path)
    loaded = load_snapshots(path)
    assert len(loaded) == len(trajectory.states)
    for original, copy in zip(trajectory.states, loaded):
        assert copy.t == original.t
        assert np.array_equal(copy.grid.edges, original.grid.edges)
        assert np.array_equal(copy.counts, original.counts)


# --------------------------------------------------------------------------
# verify-kernel subcommand


def test_verify_kernel_certifies_every_builtin(tmp_path: Path):
    out = tmp_path / "out"
    assert main(["verify-kernel", "--out", str(out)]) == 0
    payload = json.loads((out / "kernel_report.json").read_text())
    assert payload["ok"] is True
    assert [e["kernel"] for e in payload["kernels"]] == \
        ["constant", "eke", "product", "smoluchowski"]
    assert all(e["ok"] and e["violation_count"] == 0 for e in payload["kernels"])
    assert payload["fragmentation"] is None


def test_verify_kernel_covers_the_breakup_model(tmp_path: Path):
    cfg = _write(tmp_path, """\
kernel = "smoluchowski"
[fragmentation]
alpha = 0.5
gamma = 0.5
[truncation]
n = 100.0
""")
    out = tmp_path / "out"
    assert main(["verify-kernel", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "kernel_report.json").read_text())
    frag = payload["fragmentation"]
    assert frag["ok"] is True
    # (alpha + 2) / (alpha + 1 - 2s) with alpha = 1/2, s = 1/3
    assert frag["fines_constant"] == pytest.approx(3.0, rel=1e-12)
    assert len(frag["breakage"]) == 5
    assert all(c["mass_defect"] <= 1e-8 for c in frag["breakage"])


def test_verify_kernel_flags_an_understated_certificate(tmp_path: Path):
    # scale 1 cannot hold the eke rate: at (1, 1) the rate is 4*sqrt(2)
    # while the claimed bound is 2**(7/3)
    cfg = _write(tmp_path, '[kernel]\nname = "eke"\nscale = 1.0\n')
    out = tmp_path / "out"
    assert main(["verify-kernel", "--config", cfg, "--out", str(out)]) == 1
    payload = json.loads((out / "kernel_report.json").read_text())
    assert payload["ok"] is False
    assert payload["kernels"][0]["violation_count"] > 0


# --------------------------------------------------------------------------
# converge and oracle-test subcommands


CONVERGE_CONFIG = """\
kernel = "constant"
[initial]
family = "gamma"
[time]
horizon = 0.5
snapshots = [0.0, 0.5]
[truncation]
n = 40.0
[grid]
x_min = 1e-2
cells = 40
[convergence]
ns = [10.0, 20.0, 40.0]
cells_per_octave = 6
octaves_below = 10
"""


def test_converge_certifies_window_growth(tmp_path: Path):
    cfg = _write(tmp_path, CONVERGE_CONFIG)
    out = tmp_path / "out"
    assert main(["converge", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "convergence.json").read_text())
    assert payload["ok"] is True
    assert payload["decreasing"] is True
    assert payload["final_gap_rel"] <= 1e-3
    lines = (out / "distances.csv").read_text().splitlines()
    assert lines[0] == "n_low,n_high,t,gap"
    assert len(lines) == 3  # one row per window pair at the single t > 0
    for line in lines[1:]:
        n_lo, n_hi, t, gap = (float(v) for v in line.split(","))
        assert n_hi == 2.0 * n_lo
        assert t == 0.5
        assert gap > 0.0


def test_converge_ns_flag_overrides_the_config(tmp_path: Path):
    cfg = _write(tmp_path, CONVERGE_CONFIG)
    out = tmp_path / "out"
    assert main(["converge", "--config", cfg, "--ns", "10,20,40,80",
                 "--out", str(out)]) == 0
    payload = json.loads((out / "convergence.json").read_text())
    assert payload["ns"] == [10.0, 20.0, 40.0, 80.0]


def test_oracle_test_certifies_both_benchmarks(tmp_path: Path):
    out = tmp_path / "out"
    assert main(["oracle-test", "--out", str(out)]) == 0
    payload = json.loads((out / "oracle_report.json").read_text())
    assert payload["ok"] is True
    assert payload["tolerance"] == 1e-6
    assert [b["points"] for b in payload["benchmarks"]] == [160, 160]
    assert all(b["max_rel_residual"] <= 1e-10 for b in payload["benchmarks"])
