"""Run configuration, the end-to-end pipeline, sweeps, and persistence.

A run is a pure function of its configuration: no randomness, no
timestamps, fixed float formatting.  Every artifact lands inside the run
directory and is listed in manifest.json with a content checksum; the
manifest also materializes every default so that it alone reproduces the
run.  Stage failures are recorded by stage name and leave partial outputs
in place.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from gmshadow import diagnostics as dg
from gmshadow import frames as fr
from gmshadow import hermite as hm
from gmshadow import initial_data as idata
from gmshadow import regions as rg
from gmshadow import solver as sv
from gmshadow.grid import (RadialField, build_grid, field_from_csv,
                           field_to_csv)
from gmshadow.params import ModelParams, check_turing

OUT_ROOT_ENV = "GMSHADOW_OUT_ROOT"


class ConfigError(ValueError):
    """Configuration rejected before any computation."""


class RunNotFoundError(FileNotFoundError):
    """Requested run directory or artifact does not exist."""


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one experiment."""

    params: ModelParams = field(default_factory=ModelParams)
    grid_nodes: int = 769
    grid_min_spacing: float = 2.0e-5
    c_dt: float = 1.0e-2
    dt_max: float | None = None          # defaults to 1e-4 * T
    blowup_threshold: float = 1.0e8
    t_max: float | None = None           # defaults to 4 * T
    initial_kind: str = "constructed"    # constructed | constant | file
    d0: float = 0.0
    d1: float = 0.0
    constant_value: float = 1.0
    initial_path: str | None = None
    frame_nodes: int = 2048
    xi_multiplier: float = 1.0
    lk_exponents: tuple = (1.0, 2.0, 1.5)
    diagnostics_enabled: bool = True

    def materialized(self) -> "RunConfig":
        """Fill every defaulted value explicitly."""
        out = self
        if out.dt_max is None:
            out = replace(out, dt_max=1.0e-4 * out.params.T)
        if out.t_max is None:
            out = replace(out, t_max=4.0 * out.params.T)
        return out

    def to_dict(self) -> dict:
        data = asdict(self.materialized())
        data["lk_exponents"] = list(data["lk_exponents"])
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        params = data.pop("params", {})
        if isinstance(params, dict):
            params = ModelParams.from_dict(params)
        if "lk_exponents" in data:
            data["lk_exponents"] = tuple(data["lk_exponents"])
        return cls(params=params, **data)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def resolve_out_dir(out_dir, overwrite: bool = False) -> Path:
    """Resolve against the output-root override and enforce emptiness."""
    path = Path(out_dir)
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise ConfigError(f"output directory {path} is not empty "
                          "(pass overwrite to reuse)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _build_initial_u(config: RunConfig, grid) -> RadialField:
    params = config.params
    if config.initial_kind == "constructed":
        spec = idata.InitialDataSpec(params=params, d0=config.d0, d1=config.d1)
        U0 = idata.build_initial(spec, grid)
        theta0 = sv.theta_of_U(U0, params)
        return fr.u_from_U(U0, theta0, params.p)
    if config.initial_kind == "constant":
        return RadialField(grid, np.full(grid.node_count, config.constant_value))
    if config.initial_kind == "file":
        if not config.initial_path:
            raise ConfigError("initial_kind 'file' needs initial_path")
        return field_from_csv(config.initial_path, grid)
    raise ConfigError(f"unknown initial_kind {config.initial_kind!r}")


def _snapshot_name(index: int, sup_u: float) -> str:
    decade = int(round(2.0 * math.log10(max(sup_u, 1e-300))))
    return f"snap_{index:03d}_e{decade:+04d}.csv"


@dataclass
class SimulationResult:
    run_dir: Path
    manifest: dict

    @property
    def ok(self) -> bool:
        return self.manifest["status"] == "ok"


def cmd_simulate(config: RunConfig, out_dir, overwrite: bool = False) -> SimulationResult:
    """Full pipeline: data, integration, frames, modes, membership, diagnostics."""
    check = check_turing(config.params)
    if not check.valid:
        raise ConfigError("invalid exponents: " + "; ".join(check.reasons))
    config = config.materialized()
    run_dir = resolve_out_dir(out_dir, overwrite)
    (run_dir / "snapshots").mkdir(exist_ok=True)
    (run_dir / "frames").mkdir(exist_ok=True)
    (run_dir / "reports").mkdir(exist_ok=True)

    manifest: dict = {"config": config.to_dict(), "stages": [], "files": {},
                      "status": "ok", "criticality": check.criticality.value}
    _dump_json(manifest["config"], run_dir / "config.json")

    def stage(name: str):
        manifest["stages"].append({"stage": name, "status": "ok"})

    def fail(name: str, err: Exception):
        manifest["stages"].append({"stage": name, "status": "error",
                                   "error": f"{type(err).__name__}: {err}"})
        manifest["status"] = "error"

    params = config.params
    p = params.p
    try:
        grid = build_grid(params.radius, config.grid_nodes, config.grid_min_spacing)
        stage("grid")
        u0 = _build_initial_u(config, grid)
        stage("initial_data")

        result = sv.run_to_blowup(
            u0, params, c_dt=config.c_dt, dt_max=config.dt_max,
            blowup_threshold=config.blowup_threshold, t_max=config.t_max)
        traj, snapshots = result.trajectory, result.snapshots
        traj.to_csv(run_dir / "timeseries.csv")
        with open(run_dir / "snapshots" / "index.csv", "w") as fh:
            fh.write("index,file,t,sup_u,theta,theta_prime\n")
            for i, snap in enumerate(snapshots):
                name = _snapshot_name(i, snap.sup_u)
                field_to_csv(snap.u, run_dir / "snapshots" / name)
                fh.write(f"{i},{name},{snap.t:.17g},{snap.sup_u:.17g},"
                         f"{snap.theta:.17g},{snap.theta_prime:.17g}\n")
        manifest["outcome"] = {"blew_up": result.blew_up, "reason": result.reason,
                               "t_end": result.final.t,
                               "sup_end": float(np.max(result.final.u.values)),
                               "steps": int(result.final.step_index)}
        stage("integrate")

        if config.initial_kind == "constructed" and config.diagnostics_enabled:
            initial_report = check_initial_membership(
                params, grid, config.d0, config.d1, config.frame_nodes,
                config.xi_multiplier)
            _dump_json(initial_report.to_dict(),
                       run_dir / "reports" / "membership_initial.json")
            stage("initial_membership")

        analysis_done = False
        if result.blew_up and config.diagnostics_enabled:
            _analyze(config, run_dir, grid, traj, snapshots, manifest)
            analysis_done = True
        if not analysis_done:
            manifest["stages"].append({"stage": "analysis", "status": "skipped",
                                       "reason": "no blowup or diagnostics disabled"})
    except Exception as err:  # noqa: BLE001 - stage name recorded, artifacts kept
        fail("pipeline", err)

    for path in sorted(run_dir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            manifest["files"][str(path.relative_to(run_dir))] = _sha256(path)
    _dump_json(manifest, run_dir / "manifest.json")
    return SimulationResult(run_dir=run_dir, manifest=manifest)


def calibrate_blowup_time(grid, params: ModelParams, snapshot, T_start: float,
                          frame_nodes: int = 2048) -> float:
    """Fix the frame time origin by mode orthogonality at the final snapshot.

    Similarity frames amplify an error dT in the blowup time into a
    spurious expanding-mode coordinate ~ dT * e^s, so regression-level
    estimates are useless deep in the run.  The blowup time is therefore
    calibrated, like a modulation parameter, so that the expanding-mode
    projection of the last stored frame vanishes.  Falls back to T_start
    when no sign change brackets a root.
    """
    p = params.p
    t1 = float(snapshot.t)
    z0 = T_start - t1
    if z0 <= 0.0:
        return T_start
    U = RadialField(grid, snapshot.theta ** (1.0 / (p - 1.0)) * snapshot.u.values)
    s_hi = -math.log(0.3 * z0)
    y = np.linspace(0.0, 2.2 * params.K0 * math.sqrt(s_hi), frame_nodes)

    def q0_of(T: float) -> float:
        frame = fr.to_similarity(U, t1, T, p, y)
        fr.build_w_q(frame, params)
        dec = hm.decompose(frame.q, y, frame.s, params)
        return dec.q0

    lo, hi = t1 + 0.3 * z0, t1 + 3.0 * z0
    f_lo, f_hi = q0_of(lo), q0_of(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0.0:
        return T_start
    from scipy.optimize import brentq
    return float(brentq(q0_of, lo, hi, xtol=1e-18, rtol=8.9e-16))


def _analyze(config: RunConfig, run_dir: Path, grid, traj, snapshots,
             manifest: dict) -> None:
    """Frames, decompositions, membership, and the consolidated diagnostics."""
    params = config.params
    p = params.p

    fit = sv.estimate_blowup_time(traj, p)
    traj.T_est = fit.T_est
    T_peak = sv.refine_blowup_time(traj, params)
    T_frames = calibrate_blowup_time(grid, params, snapshots[-1], T_peak,
                                     config.frame_nodes)
    manifest["blowup_time"] = {
        "T_regression": fit.T_est, "slope": fit.slope,
        "r_squared": fit.r_squared, "T_peak_law": T_peak,
        "T_frames": T_frames, "n_points": fit.n_points}
    manifest["stages"].append({"stage": "blowup_time", "status": "ok"})

    history = rg.RunHistory.from_snapshots(grid, params, snapshots, T_frames)
    usable = [i for i, t in enumerate(history.times) if t < T_frames]
    s_max = -math.log(T_frames - history.times[usable[-1]])
    y_grid = fr.default_y_grid(params, s_max, config.frame_nodes)

    frames_list, decs, sidecars, reports = [], [], [], []
    for idx in usable:
        U = RadialField(grid, history.U_values[idx])
        frame = fr.to_similarity(U, float(history.times[idx]), T_frames, p,
                                 y_grid, theta_bar=float(history.thetas[idx]),
                                 theta_prime=float(snapshots[idx].theta_prime))
        fr.build_w_q(frame, params)
        sidecar = fr.write_frame(frame, params,
                                 run_dir / "frames" / f"frame_{idx:03d}.csv",
                                 run_dir / "frames" / f"frame_{idx:03d}.json")
        dec = hm.decompose(frame.q, frame.y, frame.s, params)
        _dump_json(hm.decomposition_to_dict(dec),
                   run_dir / "reports" / f"decomposition_{idx:03d}.json")
        report = rg.check_membership(history, idx, frame, dec,
                                     config.xi_multiplier)
        _dump_json(report.to_dict(),
                   run_dir / "reports" / f"membership_{idx:03d}.json")
        frames_list.append(frame)
        decs.append(dec)
        sidecars.append(sidecar)
        reports.append(report)
    manifest["stages"].append({"stage": "frames", "status": "ok",
                               "count": len(frames_list)})

    theta_info = dg.theta_star(traj)
    theta_final = float(traj.theta[-1])
    rate_ratio = abs(fit.slope) / ((p - 1.0) * theta_final)

    profile_rows = dg.profile_error_series(history, theta_info["theta_star"])
    with open(run_dir / "reports" / "profile_error.csv", "w") as fh:
        fh.write("s,intermediate_error,scaled_error\n")
        for row in profile_rows:
            fh.write(f"{row['s']:.17g},{row['error']:.17g},"
                     f"{row['scaled_error']:.17g}\n")

    final_idx = usable[-1]
    u_final = RadialField(grid, history.thetas[final_idx]
                          ** (-1.0 / (p - 1.0)) * history.U_values[final_idx])
    final_fit = dg.final_profile_check(u_final, theta_info["theta_star"], params,
                                       float(history.times[final_idx]), T_frames)

    lk_results = {}
    for k in config.lk_exponents:
        try:
            lk_results[f"{k:g}"] = dg.fit_lk(snapshots, k, params, T_frames)
        except (dg.RegimeError, sv.FitRangeError) as err:
            lk_results[f"{k:g}"] = {"error": f"{type(err).__name__}: {err}"}

    envelopes = dg.envelope_check(history, theta_info["theta_star"])
    g_fit = dg.g_decay_fit([sc["s"] for sc in sidecars],
                           [sc["term_bounds"]["sup_G"] for sc in sidecars])
    growth = [rg.growth_bound_check(dec, dec.s, params) for dec in decs]
    try:
        mode_res = rg.mode_ode_residuals(decs, params)
    except rg.InsufficientSamplesError as err:
        mode_res = {"error": str(err)}

    diagnostics = {
        "T_est": fit.T_est,
        "T_frames": T_frames,
        "rate_fit": {"slope": fit.slope, "intercept": fit.intercept,
                     "r_squared": fit.r_squared, "n_points": fit.n_points,
                     "window": list(fit.window),
                     "ratio_slope_to_theta": rate_ratio},
        "theta": theta_info,
        "theta_final": theta_final,
        "profile_error": profile_rows,
        "final_profile": final_fit.to_dict(),
        "lk": lk_results,
        "envelopes": envelopes,
        "g_decay": g_fit.to_dict(),
        "growth_bounds": growth,
        "mode_ode_residuals": mode_res,
        "membership": {
            "frames": [{"t": r.t, "s": r.s, "pass": r.overall_pass,
                        "min_margin": min(row.margin for row in r.rows)}
                       for r in reports],
            "all_pass": all(r.overall_pass for r in reports),
        },
    }
    _dump_json(diagnostics, run_dir / "reports" / "diagnostics.json")
    manifest["stages"].append({"stage": "diagnostics", "status": "ok"})


def check_initial_membership(params: ModelParams, grid, d0: float = 0.0,
                             d1: float = 0.0, frame_nodes: int = 2048,
                             xi_multiplier: float = 1.0):
    """Trapping check of the constructed data in its own frame at t = 0.

    The frame uses the construction's target time (s0 = -ln T), which is
    the frame the data were designed in; the realized blowup time of a
    subsequent run differs and is checked separately along the run.
    """
    spec = idata.InitialDataSpec(params=params, d0=d0, d1=d1)
    U0 = idata.build_initial(spec, grid)
    theta0 = sv.theta_of_U(U0, params)
    history = rg.RunHistory(grid, params, [0.0], [U0.values], [theta0],
                            T_est=spec.T)
    y = fr.default_y_grid(params, params.s0, frame_nodes)
    frame = fr.to_similarity(U0, 0.0, spec.T, params.p, y, theta_bar=theta0)
    fr.build_w_q(frame, params)
    dec = hm.decompose(frame.q, frame.y, frame.s, params)
    return rg.check_membership(history, 0, frame, dec, xi_multiplier)


def load_run(run_dir) -> dict:
    """Load a run's manifest and lazily accessible artifacts."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise RunNotFoundError(f"no run manifest under {run_dir}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    return {"run_dir": run_dir, "manifest": manifest}


def membership_report_near(run_dir, t: float | None = None,
                           s: float | None = None) -> dict:
    """Stored membership report for the frame nearest the requested time."""
    run = load_run(run_dir)
    run_dir = run["run_dir"]
    reports = sorted((run_dir / "reports").glob("membership_*.json"))
    if not reports:
        raise RunNotFoundError("run has no membership reports")
    loaded = []
    for path in reports:
        with open(path) as fh:
            loaded.append(json.load(fh))
    if t is None and s is None:
        raise ValueError("need a target time t or similarity time s")
    key = "t" if t is not None else "s"
    target = t if t is not None else s
    values = np.array([rep[key] for rep in loaded])
    idx = int(np.argmin(np.abs(values - target)))
    spacing = np.max(np.abs(np.diff(values))) if values.size > 1 else abs(target) + 1.0
    if abs(values[idx] - target) > spacing:
        raise rg.UnavailableSampleError(
            f"no stored frame near {key} = {target:g}")
    return loaded[idx]


def format_membership_table(report: dict) -> str:
    lines = [f"frame at t = {report['t']:.9e} (s = {report['s']:.4f})",
             f"{'clause':<18}{'region':<10}{'measured':>14}{'threshold':>14}"
             f"{'margin':>14}  pass"]
    for row in report["clauses"]:
        lines.append(f"{row['clause']:<18}{row['region']:<10}"
                     f"{row['measured']:>14.5e}{row['threshold']:>14.5e}"
                     f"{row['margin']:>14.5e}  {'yes' if row['pass'] else 'NO'}")
    lines.append("overall: " + ("PASS" if report["overall_pass"] else "FAIL"))
    return "\n".join(lines)


def _sweep_cell(args):
    config_dict, out_dir = args
    config = RunConfig.from_dict(config_dict)
    try:
        result = cmd_simulate(config, out_dir)
        manifest = result.manifest
        q0, q1 = idata.gamma_map(config.d0, config.d1, config.params.T,
                                 config.params)
        diag_path = Path(result.run_dir) / "reports" / "diagnostics.json"
        diag = {}
        if diag_path.exists():
            with open(diag_path) as fh:
                diag = json.load(fh)
        return {
            "d0": config.d0, "d1": config.d1, "status": manifest["status"],
            "blew_up": manifest.get("outcome", {}).get("blew_up", False),
            "T_est": diag.get("T_est", math.nan),
            "theta_star": diag.get("theta", {}).get("theta_star", math.nan),
            "membership_all_pass": diag.get("membership", {}).get("all_pass", False),
            "q0_s0": q0, "q1_s0": float(np.max(np.abs(q1))),
        }
    except Exception as err:  # noqa: BLE001 - cell isolation is the contract
        return {"d0": config.d0, "d1": config.d1,
                "status": f"failed: {type(err).__name__}", "blew_up": False,
                "T_est": math.nan, "theta_star": math.nan,
                "membership_all_pass": False, "q0_s0": math.nan,
                "q1_s0": math.nan}


def cmd_sweep(base_config: RunConfig, d0_values, d1_values, out_dir,
              workers: int = 1, overwrite: bool = False) -> Path:
    """Independent runs over a (d0, d1) grid, aggregated into one CSV."""
    cells = [(d0, d1) for d0 in d0_values for d1 in d1_values]
    if len(cells) > 1000:
        raise ConfigError("sweep grids are capped at 1000 runs")
    root = resolve_out_dir(out_dir, overwrite)
    jobs = []
    for i, (d0, d1) in enumerate(cells):
        cell_cfg = replace(base_config, d0=float(d0), d1=float(d1))
        jobs.append((cell_cfg.to_dict(), str(root / f"cell_{i:03d}")))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(job) for job in jobs]
    summary = root / "sweep_summary.csv"
    cols = ("d0", "d1", "status", "blew_up", "T_est", "theta_star",
            "membership_all_pass", "q0_s0", "q1_s0")
    with open(summary, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(row[c]) for c in cols) + "\n")
    return summary


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def cmd_diagnose(run_dir) -> dict:
    """Recompute the consolidated diagnostics from stored artifacts."""
    run = load_run(run_dir)
    run_dir = run["run_dir"]
    config = RunConfig.from_dict(run["manifest"]["config"])
    traj = sv.TrajectoryRecord.from_csv(run_dir / "timeseries.csv")
    index_path = run_dir / "snapshots" / "index.csv"
    if not index_path.exists():
        raise RunNotFoundError("run has no snapshot index")
    snapshots = []
    grid = None
    with open(index_path) as fh:
        next(fh)
        for line in fh:
            _, name, t, sup_u, theta, theta_prime = line.strip().split(",")
            u = field_from_csv(run_dir / "snapshots" / name, grid)
            grid = u.grid
            snapshots.append(sv.Snapshot(
                t=float(t), u=u, theta=float(theta),
                theta_prime=float(theta_prime), sup_u=float(sup_u)))
    manifest = dict(run["manifest"])
    _analyze(config, run_dir, grid, traj, snapshots, manifest)
    with open(run_dir / "reports" / "diagnostics.json") as fh:
        return json.load(fh)
