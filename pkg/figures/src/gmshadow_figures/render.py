"""Render figures from a run directory.

Five kinds are supported:

- profile-overlay: W(y, s) against the universal profile for three s values
- theta:           theta versus T_est - t with the limiting value marked
- rate-fit:        sup(u)^(1-p) versus t with the stored regression line
- lk-scaling:      k-norm versus T_est - t on log axes with the reference slope
- margins:         every trapping-clause margin versus s

No numerical analysis happens here: fitted values, estimates, and series
are read from the run's reports, never recomputed.  SVG output is
deterministic (fixed hash salt, no embedded dates).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "gmshadow-figures"

FIGURE_KINDS = ("profile-overlay", "theta", "rate-fit", "lk-scaling", "margins")


class UsageError(ValueError):
    """Unknown figure kind or malformed request."""


class SchemaError(ValueError):
    """Run artifact lacks a required column or key."""


@dataclass(frozen=True)
class FigureSpec:
    run_dir: str
    kind: str
    out_path: str
    fmt: str = "svg"

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise UsageError(
                f"unknown figure kind {self.kind!r}; choose from {FIGURE_KINDS}")
        if self.fmt not in ("svg", "png"):
            raise UsageError("format must be svg or png")


def _read_csv(path: Path, required: tuple) -> dict:
    if not path.exists():
        raise SchemaError(f"missing artifact {path.name}")
    with open(path) as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        for name in required:
            if name not in columns:
                raise SchemaError(f"{path.name} lacks required column '{name}'")
        rows = list(reader)
    return {name: np.array([float(r[name]) for r in rows]) for name in required}


def _read_json(path: Path) -> dict:
    if not path.exists():
        raise SchemaError(f"missing artifact {path.name}")
    with open(path) as fh:
        return json.load(fh)


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise SchemaError(f"{where} lacks required key '{key}'")
    return mapping[key]


def _save(fig, spec: FigureSpec) -> Path:
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if spec.fmt == "svg" else None
    fig.savefig(out, format=spec.fmt, metadata=metadata)
    plt.close(fig)
    return out


def _profile_overlay(run_dir: Path, spec: FigureSpec):
    manifest = _read_json(run_dir / "manifest.json")
    p = _require(_require(manifest, "config", "manifest"), "params",
                 "manifest.config")["p"]
    frames = sorted((run_dir / "frames").glob("frame_*.csv"))
    if len(frames) < 3:
        raise SchemaError("profile-overlay needs at least three frames")
    picks = [frames[0], frames[len(frames) // 2], frames[-1]]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for path in picks:
        data = _read_csv(path, ("y", "W"))
        sidecar = _read_json(path.with_suffix(".json"))
        s = _require(sidecar, "s", path.stem)
        mask = data["y"] <= 4.0 * math.sqrt(s)
        ax.plot(data["y"][mask], data["W"][mask], label=f"W at s = {s:.2f}")
        z = data["y"][mask] / math.sqrt(s)
        universal = (p - 1.0 + (p - 1.0) ** 2 / (4 * p) * z * z) ** (-1.0 / (p - 1.0))
        ax.plot(data["y"][mask], universal, linestyle="--",
                label=f"profile at s = {s:.2f}")
    ax.set_xlabel("y")
    ax.set_ylabel("W")
    ax.set_title("rescaled solution against the universal profile")
    ax.legend(fontsize=8)
    return _save(fig, spec)


def _theta(run_dir: Path, spec: FigureSpec):
    series = _read_csv(run_dir / "timeseries.csv", ("t", "theta"))
    diag = _read_json(run_dir / "reports" / "diagnostics.json")
    T_est = _require(diag, "T_est", "diagnostics.json")
    theta_star = _require(_require(diag, "theta", "diagnostics.json"),
                          "theta_star", "diagnostics.theta")
    z = T_est - series["t"]
    keep = z > 0
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogx(z[keep], series["theta"][keep], label="theta(t)")
    ax.axhline(theta_star, color="k", linestyle=":",
               label=f"theta* = {theta_star!r}")
    ax.invert_xaxis()
    ax.set_xlabel("T_est - t")
    ax.set_ylabel("theta")
    ax.set_title("non-local factor along the run")
    ax.legend(fontsize=8)
    return _save(fig, spec)


def _rate_fit(run_dir: Path, spec: FigureSpec):
    manifest = _read_json(run_dir / "manifest.json")
    p = _require(_require(manifest, "config", "manifest"), "params",
                 "manifest.config")["p"]
    series = _read_csv(run_dir / "timeseries.csv", ("t", "sup_u"))
    diag = _read_json(run_dir / "reports" / "diagnostics.json")
    rate = _require(diag, "rate_fit", "diagnostics.json")
    slope = _require(rate, "slope", "diagnostics.rate_fit")
    intercept = _require(rate, "intercept", "diagnostics.rate_fit")
    y = series["sup_u"] ** (1.0 - p)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(series["t"], y, ".", markersize=2, label="sup(u)^(1-p)")
    ax.plot(series["t"], slope * series["t"] + intercept, "r-",
            label=f"fit, slope = {slope!r}")
    ax.set_xlabel("t")
    ax.set_ylabel("sup(u)^(1-p)")
    ax.set_title("blowup rate regression")
    ax.legend(fontsize=8)
    return _save(fig, spec)


def _lk_scaling(run_dir: Path, spec: FigureSpec):
    diag = _read_json(run_dir / "reports" / "diagnostics.json")
    lk = _require(diag, "lk", "diagnostics.json")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    drew_reference = False
    for key in sorted(lk):
        entry = lk[key]
        if "z_series" not in entry or "norm_series" not in entry:
            continue
        z = np.asarray(entry["z_series"])
        norms = np.asarray(entry["norm_series"])
        ax.loglog(z, norms, "o-", markersize=3, label=f"k = {key}")
        if not drew_reference and "exponent_target" in entry:
            target = entry["exponent_target"]
            ref = norms[0] * (z / z[0]) ** target
            ax.loglog(z, ref, "k--",
                      label=f"reference slope = {target!r}")
            drew_reference = True
    if not drew_reference:
        raise SchemaError("diagnostics.lk lacks a supercritical entry "
                          "with 'exponent_target'")
    ax.invert_xaxis()
    ax.set_xlabel("T_est - t")
    ax.set_ylabel("k-norm")
    ax.set_title("norm blowup scalings")
    ax.legend(fontsize=8)
    return _save(fig, spec)


def _margins(run_dir: Path, spec: FigureSpec):
    reports = sorted((run_dir / "reports").glob("membership_0*.json"))
    reports = [p for p in reports if p.stem != "membership_initial"]
    if not reports:
        raise SchemaError("run has no per-frame membership reports")
    series: dict = {}
    s_values = []
    for path in reports:
        rep = _read_json(path)
        s_values.append(_require(rep, "s", path.name))
        for clause in _require(rep, "clauses", path.name):
            name = _require(clause, "clause", path.name)
            series.setdefault(name, []).append(
                _require(clause, "margin", path.name))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name in sorted(series):
        ax.plot(s_values, series[name], "o-", markersize=3, label=name)
    ax.axhline(0.0, color="k", linewidth=0.8)
    ax.set_xlabel("s")
    ax.set_ylabel("margin (threshold - measured)")
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.set_title("trapping-clause margins along the run")
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, spec)


_RENDERERS = {
    "profile-overlay": _profile_overlay,
    "theta": _theta,
    "rate-fit": _rate_fit,
    "lk-scaling": _lk_scaling,
    "margins": _margins,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the written path."""
    run_dir = Path(spec.run_dir)
    if not (run_dir / "manifest.json").exists():
        raise SchemaError(f"{run_dir} is not a run directory (no manifest)")
    return _RENDERERS[spec.kind](run_dir, spec)
