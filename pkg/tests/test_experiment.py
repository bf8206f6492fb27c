import json
from pathlib import Path

import pytest

from gmshadow.experiment import (ConfigError, RunConfig, RunNotFoundError,
                                 check_initial_membership, cmd_diagnose,
                                 cmd_simulate, cmd_sweep, load_run,
                                 membership_report_near)
from gmshadow.grid import build_grid
from gmshadow.params import ModelParams


def small_config(**kw):
    """Cheap constructed-data run: coarse grid, early threshold."""
    defaults = dict(
        params=ModelParams(),
        grid_nodes=257,
        grid_min_spacing=1e-4,
        c_dt=2e-2,
        dt_max=2e-6,
        blowup_threshold=1e8,
        frame_nodes=1024,
    )
    defaults.update(kw)
    return RunConfig(**defaults)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "small"
    config = small_config()
    result = cmd_simulate(config, out)
    return config, result


def test_simulate_produces_expected_layout(small_run):
    _, result = small_run
    root = result.run_dir
    assert result.ok
    assert (root / "config.json").exists()
    assert (root / "manifest.json").exists()
    assert (root / "timeseries.csv").exists()
    assert (root / "snapshots" / "index.csv").exists()
    assert sorted((root / "frames").glob("frame_*.csv"))
    assert sorted((root / "reports").glob("decomposition_*.json"))
    assert sorted((root / "reports").glob("membership_*.json"))
    assert (root / "reports" / "diagnostics.json").exists()
    assert (root / "reports" / "profile_error.csv").exists()


def test_manifest_checksums_cover_every_file(small_run):
    _, result = small_run
    root = result.run_dir
    listed = set(result.manifest["files"])
    on_disk = {str(p.relative_to(root)) for p in root.rglob("*")
               if p.is_file() and p.name != "manifest.json"}
    assert listed == on_disk
    import hashlib
    name, digest = sorted(result.manifest["files"].items())[0]
    actual = hashlib.sha256((root / name).read_bytes()).hexdigest()
    assert actual == digest


def test_manifest_materializes_defaults(small_run):
    config, result = small_run
    stored = result.manifest["config"]
    assert stored["dt_max"] == pytest.approx(2e-6)
    assert stored["t_max"] == pytest.approx(4.0 * config.params.T)
    again = RunConfig.from_dict(stored)
    assert again.params == config.params


def test_turing_refusal_before_compute(tmp_path):
    config = small_config(params=ModelParams(p=2.0, r=1.0, gamma=1.0))
    with pytest.raises(ConfigError):
        cmd_simulate(config, tmp_path / "never")
    assert not (tmp_path / "never").exists()


def test_nonempty_output_dir_rejected(tmp_path):
    out = tmp_path / "busy"
    out.mkdir()
    (out / "junk.txt").write_text("x")
    with pytest.raises(ConfigError):
        cmd_simulate(small_config(), out)


def test_determinism_bit_identical(tmp_path):
    config = small_config(blowup_threshold=1e6, grid_nodes=129,
                          grid_min_spacing=5e-4, dt_max=5e-6,
                          diagnostics_enabled=False)
    r1 = cmd_simulate(config, tmp_path / "a")
    r2 = cmd_simulate(config, tmp_path / "b")
    for rel in r1.manifest["files"]:
        b1 = (r1.run_dir / rel).read_bytes()
        b2 = (r2.run_dir / rel).read_bytes()
        assert b1 == b2, f"artifact {rel} differs between reruns"
    assert r1.manifest["files"] == r2.manifest["files"]


def test_membership_report_near_and_errors(small_run):
    _, result = small_run
    report = membership_report_near(result.run_dir, t=0.0)
    assert report["t"] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(Exception):
        membership_report_near(result.run_dir, s=1e9)
    with pytest.raises(RunNotFoundError):
        membership_report_near("/nonexistent/run", t=0.0)


def test_diagnose_recomputes_from_disk(small_run):
    _, result = small_run
    stored = json.load(open(result.run_dir / "reports" / "diagnostics.json"))
    recomputed = cmd_diagnose(result.run_dir)
    assert recomputed["T_est"] == pytest.approx(stored["T_est"], rel=1e-12)
    assert recomputed["theta"]["theta_star"] == pytest.approx(
        stored["theta"]["theta_star"], rel=1e-12)


def test_no_blowup_outcome_recorded(tmp_path):
    config = small_config(
        params=ModelParams(p=2.0, r=1.0, gamma=1.5, T=1e-2),
        initial_kind="constant", constant_value=0.5,
        dt_max=1e-4, t_max=0.05, blowup_threshold=1e8)
    result = cmd_simulate(config, tmp_path / "quiet")
    assert result.ok
    assert result.manifest["outcome"]["blew_up"] is False
    assert result.manifest["outcome"]["reason"] == "t_max"
    skipped = [s for s in result.manifest["stages"] if s["status"] == "skipped"]
    assert skipped and skipped[0]["stage"] == "analysis"


def test_sweep_isolates_failures_and_aggregates(tmp_path):
    config = small_config(blowup_threshold=1e6, grid_nodes=129,
                          grid_min_spacing=5e-4, dt_max=5e-6,
                          diagnostics_enabled=False)
    # d0 = -2 dips the data negative -> that cell fails, others complete
    summary = cmd_sweep(config, [-2.0, 0.0, 0.2], [0.0], tmp_path / "sweep")
    lines = Path(summary).read_text().splitlines()
    assert lines[0].startswith("d0,d1,status")
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 3
    status = {float(r[0]): r[2] for r in rows}
    assert status[-2.0] != "ok"
    assert status[0.0] == "ok"
    assert status[0.2] == "ok"
    # gamma-map samples recorded for completed cells
    q0 = {float(r[0]): float(r[7]) for r in rows if r[2] == "ok"}
    assert q0[0.2] > q0[0.0]


def test_check_initial_membership_default_data():
    params = ModelParams()
    grid = build_grid(params.radius, 769, 2e-5)
    report = check_initial_membership(params, grid)
    assert report.overall_pass
    modes = {r.clause: r for r in report.rows}
    assert modes["q0"].measured < 1e-6
    assert modes["q1"].measured == 0.0


def test_load_run_missing(tmp_path):
    with pytest.raises(RunNotFoundError):
        load_run(tmp_path / "ghost")


def test_output_root_override(tmp_path, monkeypatch):
    from gmshadow.experiment import resolve_out_dir
    monkeypatch.setenv("GMSHADOW_OUT_ROOT", str(tmp_path / "root"))
    resolved = resolve_out_dir("my_run")
    assert resolved == tmp_path / "root" / "my_run"
    assert resolved.exists()
    # absolute paths are untouched
    absolute = resolve_out_dir(tmp_path / "elsewhere")
    assert absolute == tmp_path / "elsewhere"
