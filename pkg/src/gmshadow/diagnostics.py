"""Quantitative verification of the blowup asymptotics.

Everything here consumes stored trajectories and snapshots; nothing feeds
back into the dynamics.  Fits report their residuals and windows so that
acceptance thresholds are applied downstream, never silently.  All
diagnostics use the realized blowup-time estimate rather than the
configured target: the discrete system blows up when it blows up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gmshadow.grid import RadialField, ball_volume, mean_power_integral
from gmshadow.params import ModelParams
from gmshadow.profiles import final_profile_shape, phi0
from gmshadow.regions import RunHistory, region_bounds
from gmshadow.solver import FitRangeError, TrajectoryRecord


class WindowError(ValueError):
    """Empty or degenerate fit window."""


class RegimeError(ValueError):
    """Norm-fit invoked for the wrong exponent regime."""


@dataclass
class FitResult:
    exponent: float | None
    prefactor: float | None
    residual: float
    window: tuple
    n_points: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "prefactor": self.prefactor,
                "residual": self.residual, "window": list(self.window),
                "n_points": self.n_points, "extras": self.extras}


def theta_star(traj: TrajectoryRecord) -> dict:
    """Limit of the non-local factor and its power-law convergence rate.

    theta* is the last sampled value; the rate eps_hat comes from a
    regression of ln|theta - theta*| on ln(T_est - t) over all but the
    last decade.  Oscillation or lacking range is reported, not raised.
    """
    theta = traj.asarray("theta")
    t = traj.asarray("t")
    sup = traj.asarray("sup_u")
    star = float(theta[-1])
    out = {"theta_star": star, "theta_min": float(theta.min()),
           "theta_max": float(theta.max()), "eps_hat": None,
           "converged": True, "note": ""}
    dev = theta - star
    if np.max(np.abs(dev)) <= 1e-13 * max(abs(star), 1.0):
        out["note"] = "theta constant along the run"
        return out
    if traj.T_est is None or sup.max() < 1e6:
        out["note"] = "insufficient range for a rate fit"
        out["converged"] = bool(np.max(np.abs(dev)) < 0.1 * abs(star))
        return out
    z = traj.T_est - t
    z_end = z[-1]
    mask = (z >= 10.0 * z_end) & (np.abs(dev) > 0.0) & (z > 0.0)
    if mask.sum() < 8:
        out["note"] = "too few points outside the final decade"
        return out
    x = np.log(z[mask])
    y = np.log(np.abs(dev[mask]))
    eps_hat, _ = np.polyfit(x, y, 1)
    out["eps_hat"] = float(eps_hat)
    signs = np.sign(dev[mask])
    flips = np.count_nonzero(np.diff(signs))
    out["converged"] = flips <= 0.2 * signs.size
    if not out["converged"]:
        out["note"] = "theta oscillates around its final value"
    return out


def intermediate_error(u: RadialField, t: float, T_est: float,
                       theta_star_value: float, params: ModelParams) -> float:
    """Sup distance between the rescaled solution and the slow profile."""
    if t >= T_est:
        raise ValueError("t must precede the blowup estimate")
    z = T_est - t
    p = params.p
    core = math.sqrt(z * abs(math.log(z)))
    target = theta_star_value ** (-1.0 / (p - 1.0)) * phi0(u.grid.nodes / core, p)
    return float(np.max(np.abs(z ** (1.0 / (p - 1.0)) * u.values - target)))


def profile_error_series(history: RunHistory, theta_star_value: float) -> list:
    """(s, error, scaled error) rows across stored snapshots."""
    params = history.params
    p = params.p
    rows = []
    for idx in range(len(history.times)):
        t = float(history.times[idx])
        if t >= history.T_est:
            continue
        z = history.T_est - t
        u_vals = history.thetas[idx] ** (-1.0 / (p - 1.0)) * history.U_values[idx]
        u = RadialField(history.grid, u_vals)
        err = intermediate_error(u, t, history.T_est, theta_star_value, params)
        L = abs(math.log(z))
        rows.append({"s": -math.log(z), "error": err,
                     "scaled_error": err * (1.0 + math.sqrt(L))})
    return rows


def final_profile_check(u_final: RadialField, theta_star_value: float,
                        params: ModelParams, t_stop: float,
                        T_est: float) -> FitResult:
    """Log-log fit of the end state against the singular shape abscissa."""
    z = T_est - t_stop
    inner = params.K0 * math.sqrt(z * abs(math.log(z)))
    outer = params.eps0
    nodes = u_final.grid.nodes
    mask = (nodes >= inner) & (nodes <= outer) & (u_final.values > 0.0)
    if mask.sum() < 8:
        raise WindowError("annulus holds too few nodes for a fit")
    x = nodes[mask]
    p = params.p
    abscissa = np.log((p - 1.0) ** 2 * x ** 2 / (8.0 * p * np.abs(np.log(x))))
    y = np.log(u_final.values[mask])
    slope, intercept = np.polyfit(abscissa, y, 1)
    fit = slope * abscissa + intercept
    residual = float(np.sqrt(np.mean((y - fit) ** 2)))
    return FitResult(
        exponent=float(slope), prefactor=float(math.exp(intercept)),
        residual=residual, window=(float(inner), float(outer)),
        n_points=int(mask.sum()),
        extras={
            "slope_target": -1.0 / (p - 1.0),
            "intercept": float(intercept),
            "intercept_target": -math.log(theta_star_value) / (p - 1.0),
        })


def lk_norm(u: RadialField, k: float, params: ModelParams) -> float:
    """Integral of |u|^k over the ball."""
    if k <= 0.0:
        raise ValueError("k must be positive")
    return ball_volume(params.radius, params.dim) \
        * mean_power_integral(u, k, params.dim)


def _applicable_regime(k: float, params: ModelParams) -> str:
    gap = k / (params.p - 1.0) - params.dim / 2.0
    if gap < 0.0:
        return "subcritical"
    if gap > 0.0:
        return "supercritical"
    return "critical"


_REGIME_ITEM = {"subcritical": "(i)", "supercritical": "(ii)", "critical": "(iii)"}


def fit_lk(snapshots, k: float, params: ModelParams, T_est: float,
           regime: str | None = None, decades: float = 3.0) -> dict:
    """Blowup scaling of the k-norm over stored snapshots.

    Supercritical k: power-law fit of the norm after dividing out the
    known |ln(T-t)|^(N/2) factor.  Subcritical k: boundedness summary.
    Critical k: flatness of the norm against |ln(T-t)|^(N/2+1).
    The last half-decade before the stop is excluded as discretization
    dominated; the fit then uses the deepest `decades` decades.
    """
    applicable = _applicable_regime(k, params)
    if regime is not None and regime != applicable:
        raise RegimeError(
            f"k={k} falls under item {_REGIME_ITEM[applicable]} "
            f"({applicable}), not {regime}")
    usable = [s for s in snapshots if s.t < T_est]
    z = np.array([T_est - s.t for s in usable])
    if z.size < 4 or z.max() / z.min() < 10.0 ** 3:
        raise FitRangeError("need snapshots spanning three decades of T-t")
    z_cut = z.min() * 10.0 ** 0.5
    keep = (z >= z_cut) & (z <= z_cut * 10.0 ** decades)
    norms = np.array([
        lk_norm(RadialField(s.u.grid, s.u.values), k, params)
        for s, m in zip(usable, keep) if m])
    z = z[keep]
    N = params.dim
    out = {"k": k, "regime": applicable, "n_points": int(z.size),
           "window_z": (float(z.max()), float(z.min()))}
    out["z_series"] = z.tolist()
    out["norm_series"] = norms.tolist()
    if applicable == "supercritical":
        x = np.log(z)
        y = np.log(norms) - (N / 2.0) * np.log(np.abs(np.log(z)))
        slope, intercept = np.polyfit(x, y, 1)
        fitted = slope * x + intercept
        raw_slope = float(np.polyfit(x, np.log(norms), 1)[0])
        out.update({
            "exponent": float(slope),
            "exponent_target": N / 2.0 - k / (params.p - 1.0),
            "prefactor": float(math.exp(intercept)),
            "raw_loglog_slope": raw_slope,
            "residual": float(np.sqrt(np.mean((y - fitted) ** 2))),
        })
    elif applicable == "subcritical":
        last_decade = z <= z.min() * 10.0
        vals = norms[last_decade]
        out.update({
            "sup_norm": float(np.max(norms)),
            "final_norm": float(norms[-1]),
            "last_decade_drift": float((vals.max() - vals.min())
                                       / max(vals.mean(), 1e-300)),
        })
    else:
        ratio = norms / np.abs(np.log(z)) ** (N / 2.0 + 1.0)
        slope = float(np.polyfit(np.log(z), np.log(ratio), 1)[0])
        out.update({
            "ratio_first": float(ratio[0]),
            "ratio_last": float(ratio[-1]),
            "ratio_min": float(ratio.min()),
            "log_trend_slope": slope,
            "ratio_series": ratio.tolist(),
        })
    return out


def fundamental_integral(a: float, b: float, n: float, m: float) -> dict:
    """Integral of (-ln s)^n s^m over [a, b] with its two-endpoint bound ratio."""
    if not 0.0 < a < b < 1.0:
        raise ValueError("need 0 < a < b < 1")
    if n < 0.0:
        raise ValueError("n must be non-negative")
    if m >= 0.0:
        raise ValueError("m must be negative")
    if m == -1.0:
        raise ValueError("m = -1 is excluded")
    lo, hi = -math.log(b), -math.log(a)
    edges = np.linspace(lo, hi, 201)
    gx, gw = np.polynomial.legendre.leggauss(10)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = (mids[:, None] + half[:, None] * gx[None, :]).ravel()
    wts = (half[:, None] * gw[None, :]).ravel()
    value = float(np.dot(wts, nodes ** n * np.exp(-(m + 1.0) * nodes)))
    bound = (-math.log(b)) ** n * b ** (1.0 + m) \
        + (-math.log(a)) ** n * a ** (1.0 + m)
    return {"value": value, "bound_ratio": abs(value) / bound}


def envelope_check(history: RunHistory, theta_star_value: float) -> dict:
    """Three-region envelopes of the rescaled solution at every snapshot.

    The core closeness constant and the outer ceiling are measured; the
    annulus ceiling (factor 4 of the singular shape) and the outer floor
    (1/2) are absolute and yield pass flags.
    """
    params = history.params
    p = params.p
    nodes = history.grid.nodes
    per_frame = []
    for idx in range(len(history.times)):
        t = float(history.times[idx])
        if t >= history.T_est:
            continue
        z = history.T_est - t
        L = abs(math.log(z))
        geom = region_bounds(t, history.T_est, params)
        U = history.U_values[idx]
        row = {"t": t, "s": -math.log(z)}
        core = nodes <= geom.p2_inner
        if np.any(core):
            shape = z ** (-1.0 / (p - 1.0)) * phi0(
                nodes[core] / math.sqrt(z * L), p)
            err = np.max(np.abs(U[core] - shape))
            row["core_closeness_constant"] = float(
                err * z ** (1.0 / (p - 1.0)) * (1.0 + math.sqrt(L)))
        annulus = (nodes >= geom.p2_inner) & (nodes <= geom.p2_outer)
        if np.any(annulus):
            xa = nodes[annulus]
            ceiling = 4.0 * final_profile_shape(xa, p)
            row["annulus_value_ratio"] = float(np.max(U[annulus] / ceiling))
            grad = history.grad_values(idx)[annulus]
            bracket = ((p - 1.0) ** 2 * xa ** 2 / (8.0 * p * np.abs(np.log(xa))))
            gceiling = 8.0 * params.C0 * bracket ** (-1.0 / (p - 1.0) - 0.5) \
                / np.abs(np.log(xa))
            row["annulus_gradient_ratio"] = float(np.max(np.abs(grad) / gceiling))
        outer = nodes >= params.eps0
        row["outer_min"] = float(np.min(U[outer]))
        row["outer_max"] = float(np.max(U[outer]))
        row["outer_floor_pass"] = bool(row["outer_min"] >= 0.5)
        row["annulus_pass"] = bool(row.get("annulus_value_ratio", 0.0) <= 1.0
                                   and row.get("annulus_gradient_ratio", 0.0) <= 1.0)
        per_frame.append(row)
    return {
        "frames": per_frame,
        "all_outer_floor_pass": all(r["outer_floor_pass"] for r in per_frame),
        "all_annulus_pass": all(r["annulus_pass"] for r in per_frame),
        "max_core_constant": max((r.get("core_closeness_constant", 0.0)
                                  for r in per_frame), default=0.0),
    }


def g_decay_fit(s_values, g_sups) -> FitResult:
    """Exponential-decay fit of the forcing term across frames."""
    s = np.asarray(s_values, dtype=float)
    g = np.asarray(g_sups, dtype=float)
    mask = g > 0.0
    if mask.sum() < 3:
        raise WindowError("need at least three frames with a positive sup")
    slope, intercept = np.polyfit(s[mask], np.log(g[mask]), 1)
    fitted = slope * s[mask] + intercept
    residual = float(np.sqrt(np.mean((np.log(g[mask]) - fitted) ** 2)))
    return FitResult(exponent=float(slope), prefactor=float(math.exp(intercept)),
                     residual=residual,
                     window=(float(s[mask][0]), float(s[mask][-1])),
                     n_points=int(mask.sum()),
                     extras={"eta": float(-slope)})
