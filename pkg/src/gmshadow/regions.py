"""Region geometry, entry times, the local rescaling, and the trapping checker.

The ball splits into a blowup core P1, an intermediate annulus P2, and a
regular outer region P3.  A point x of the annulus is assigned the entry
time t(x) at which the core boundary sweeps past it,

    |x| = (K0/4) sqrt( (T - t(x)) |ln(T - t(x))| ),

solved on the monotone branch T - t(x) in (0, 1/e).  Around (x, t(x)) the
solution is rescaled to local unit size; the checker compares it against
the flat envelope, and compares the core remainder's mode coordinates
against their shrinking thresholds.  The checker observes and reports, it
never steers the dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from gmshadow.frames import SimilarityFrame
from gmshadow.grid import RadialField, RadialGrid, gradient, heat_semigroup
from gmshadow.hermite import SpectralDecomposition, grad_perp, reconstruct
from gmshadow.params import ModelParams
from gmshadow.profiles import hat_U


class NoSolutionError(ValueError):
    """Radius outside the uniquely solvable entry-time range."""


class UnavailableSampleError(LookupError):
    """Query outside the stored history."""


class InsufficientSamplesError(ValueError):
    """Too few samples for a finite-difference estimate."""


@dataclass(frozen=True)
class RegionGeometry:
    t: float
    T_est: float
    p1_outer: float
    p2_inner: float
    p2_outer: float
    p3_inner: float

    def covers(self, radius: float) -> bool:
        """The three regions cover [0, radius] whenever they overlap in order."""
        return (self.p2_inner <= self.p1_outer + 1e-300
                and self.p3_inner <= self.p2_outer)


def region_bounds(t: float, T_est: float, params: ModelParams) -> RegionGeometry:
    if t >= T_est:
        raise ValueError("t must precede the blowup estimate")
    z = T_est - t
    p1 = params.K0 * math.sqrt(z * abs(math.log(z)))
    return RegionGeometry(t=t, T_est=T_est, p1_outer=p1, p2_inner=p1 / 4.0,
                          p2_outer=params.eps0, p3_inner=params.eps0 / 4.0)


@dataclass(frozen=True)
class EntryTime:
    t_x: float
    varrho: float


def t_of_x(absx: float, T_est: float, K0: float) -> EntryTime:
    """Entry time of radius |x| on the monotone branch T - t in (0, 1/e)."""
    absx = float(absx)
    if absx <= 0.0:
        raise NoSolutionError("radius must be positive")
    peak = (K0 / 4.0) * math.exp(-0.5)
    if absx > peak:
        raise NoSolutionError(
            f"radius {absx:.4g} beyond the solvable range (max {peak:.4g})")
    target = math.log(4.0 * absx / K0)

    def f(v: float) -> float:
        return 0.5 * (v + math.log(-v)) - target

    lo, hi = -700.0, -1.0 - 1e-12
    if f(lo) > 0.0:
        raise NoSolutionError("radius too small to resolve the entry time")
    v = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16)
    varrho = math.exp(v)
    return EntryTime(t_x=T_est - varrho, varrho=varrho)


class RunHistory:
    """Immutable record of a run: rescaled snapshots, thetas, and baselines."""

    def __init__(self, grid: RadialGrid, params: ModelParams, times, U_values,
                 thetas, T_est: float):
        self.grid = grid
        self.params = params
        self.times = np.asarray(times, dtype=float)
        self.U_values = [np.asarray(v, dtype=float) for v in U_values]
        self.thetas = np.asarray(thetas, dtype=float)
        self.T_est = float(T_est)
        self._splines: dict = {}
        self._grads: dict = {}
        self._grad_splines: dict = {}
        self._heat_grads: dict = {}

    @classmethod
    def from_snapshots(cls, grid: RadialGrid, params: ModelParams, snapshots,
                       T_est: float) -> "RunHistory":
        root = 1.0 / (params.p - 1.0)
        times = [s.t for s in snapshots]
        U_values = [s.theta ** root * s.u.values for s in snapshots]
        thetas = [s.theta for s in snapshots]
        return cls(grid, params, times, U_values, thetas, T_est)

    def spline(self, index: int) -> PchipInterpolator:
        if index not in self._splines:
            self._splines[index] = PchipInterpolator(
                self.grid.nodes, self.U_values[index], extrapolate=False)
        return self._splines[index]

    def grad_values(self, index: int) -> np.ndarray:
        if index not in self._grads:
            f = RadialField(self.grid, self.U_values[index])
            self._grads[index] = gradient(f).values
        return self._grads[index]

    def grad_spline(self, index: int) -> PchipInterpolator:
        if index not in self._grad_splines:
            self._grad_splines[index] = PchipInterpolator(
                self.grid.nodes, self.grad_values(index), extrapolate=False)
        return self._grad_splines[index]

    def heat_gradient(self, t: float) -> np.ndarray:
        """Gradient of the diffused initial field at time t (Neumann walls)."""
        if t not in self._heat_grads:
            U0 = RadialField(self.grid, self.U_values[0])
            if t == 0.0:
                evolved = U0
            else:
                evolved = heat_semigroup(U0, t, self.params.dim, dt=t / 64.0)
            self._heat_grads[t] = gradient(evolved).values
        return self._heat_grads[t]


def rescaled_U(history: RunHistory, x: float, xi: float, tau: float) -> float:
    """Locally rescaled solution around (x, t(x)), interpolated in space-time."""
    params = history.params
    entry = t_of_x(abs(x), history.T_est, params.K0)
    t_query = entry.varrho * tau + entry.t_x
    pos = abs(x + xi * math.sqrt(entry.varrho))
    if pos > history.grid.radius:
        raise UnavailableSampleError("position outside the ball")
    times = history.times
    if not times[0] <= t_query <= times[-1]:
        raise UnavailableSampleError("time outside the stored history")
    scale = entry.varrho ** (1.0 / (params.p - 1.0))
    hi = int(np.searchsorted(times, t_query, side="left"))
    if hi >= times.size:
        hi = times.size - 1
    if times[hi] == t_query or hi == 0:
        return scale * float(history.spline(hi)(pos))
    lo = hi - 1
    w = (t_query - times[lo]) / (times[hi] - times[lo])
    val = (1.0 - w) * float(history.spline(lo)(pos)) \
        + w * float(history.spline(hi)(pos))
    return scale * val


@dataclass
class ClauseRow:
    clause: str
    region: str
    s_or_t: float
    measured: float
    threshold: float

    @property
    def margin(self) -> float:
        return self.threshold - self.measured

    @property
    def passed(self) -> bool:
        return self.measured <= self.threshold

    def to_dict(self) -> dict:
        return {"clause": self.clause, "region": self.region,
                "s_or_t": self.s_or_t, "measured": self.measured,
                "threshold": self.threshold, "margin": self.margin,
                "pass": self.passed}


@dataclass
class ShrinkingSetReport:
    t: float
    s: float
    rows: list

    @property
    def overall_pass(self) -> bool:
        return all(row.passed for row in self.rows)

    def to_dict(self) -> dict:
        return {"t": self.t, "s": self.s, "overall_pass": self.overall_pass,
                "clauses": [row.to_dict() for row in self.rows]}


def _mode_rows(dec: SpectralDecomposition, frame: SimilarityFrame,
               params: ModelParams) -> list:
    s = frame.s
    A = params.A
    y = frame.y
    weight = 1.0 + np.abs(y) ** 3
    gp = grad_perp(frame.q, y, s, params)
    return [
        ClauseRow("q0", "P1", s, abs(dec.q0), A / s ** 2),
        ClauseRow("q1", "P1", s, float(np.max(np.abs(dec.q1))), A / s ** 2),
        ClauseRow("q2", "P1", s, float(np.max(np.abs(dec.q2))),
                  A ** 2 * math.log(s) / s ** 2),
        ClauseRow("q_minus", "P1", s,
                  float(np.max(np.abs(dec.q_minus) / weight)), A ** 2 / s ** 2),
        ClauseRow("grad_perp", "P1", s, float(np.max(gp / weight)),
                  A / s ** 2),
        ClauseRow("q_e", "P1", s, float(np.max(np.abs(dec.q_e))),
                  A ** 2 / math.sqrt(s)),
    ]


def _intermediate_rows(history: RunHistory, index: int, t: float,
                       params: ModelParams, xi_multiplier: float) -> list:
    geom = region_bounds(t, history.T_est, params)
    p, K0 = params.p, params.K0
    rows = []
    if geom.p2_inner >= geom.p2_outer:
        rows.append(ClauseRow("envelope_value", "P2(empty)", t, 0.0, params.delta0))
        rows.append(ClauseRow("envelope_gradient", "P2(empty)", t, 0.0, params.C0))
        return rows
    n_x = max(2, int(math.ceil(16.0 * math.log10(geom.p2_outer / geom.p2_inner))))
    xs = np.geomspace(geom.p2_inner, geom.p2_outer, n_x)
    spline = history.spline(index)
    gspline = history.grad_spline(index)
    worst_val = 0.0
    worst_grad = 0.0
    for x in xs:
        entry = t_of_x(x, history.T_est, K0)
        tau = (t - entry.t_x) / entry.varrho
        envelope = float(hat_U(tau, p, K0))
        ln_rho = abs(math.log(entry.varrho))
        xi_span = xi_multiplier * params.alpha0 * math.sqrt(ln_rho)
        root_rho = math.sqrt(entry.varrho)
        positions = np.abs(x + np.linspace(-1.0, 1.0, 17) * xi_span * root_rho)
        positions = positions[positions <= history.grid.radius]
        scale = entry.varrho ** (1.0 / (p - 1.0))
        local = scale * spline(positions)
        worst_val = max(worst_val, float(np.max(np.abs(local - envelope))))
        grad_local = scale * root_rho * np.abs(gspline(positions))
        worst_grad = max(worst_grad, float(np.max(grad_local)) * math.sqrt(ln_rho))
    rows.append(ClauseRow("envelope_value", "P2", t, worst_val, params.delta0))
    rows.append(ClauseRow("envelope_gradient", "P2", t, worst_grad, params.C0))
    return rows


def _outer_rows(history: RunHistory, index: int, t: float,
                params: ModelParams) -> list:
    nodes = history.grid.nodes
    mask = nodes >= params.eps0 / 4.0
    U_t = history.U_values[index][mask]
    U_0 = history.U_values[0][mask]
    drift = float(np.max(np.abs(U_t - U_0)))
    grad_t = history.grad_values(index)[mask]
    grad_base = history.heat_gradient(t)[mask]
    grad_drift = float(np.max(np.abs(grad_t - grad_base)))
    return [
        ClauseRow("value_drift", "P3", t, drift, params.eta0),
        ClauseRow("gradient_drift", "P3", t, grad_drift, params.eta0),
    ]


def check_membership(history: RunHistory, index: int, frame: SimilarityFrame,
                     dec: SpectralDecomposition,
                     xi_multiplier: float = 1.0) -> ShrinkingSetReport:
    """Evaluate every trapping clause at one stored snapshot."""
    params = history.params
    t = float(history.times[index])
    geom = region_bounds(t, history.T_est, params)
    if not geom.covers(history.grid.radius):
        raise ValueError("regions fail to cover the ball")
    rows = _mode_rows(dec, frame, params)
    rows += _intermediate_rows(history, index, t, params, xi_multiplier)
    rows += _outer_rows(history, index, t, params)
    return ShrinkingSetReport(t=t, s=frame.s, rows=rows)


def growth_bound_check(dec: SpectralDecomposition, s: float,
                       params: ModelParams) -> dict:
    """Measured constants of the aggregate remainder bounds."""
    q = reconstruct(dec)
    y = dec.y
    A = params.A
    weight = (1.0 + np.abs(y) ** 3)
    inner = np.abs(y) <= params.K0 * math.sqrt(s)
    c_global = float(np.max(np.abs(q)) * math.sqrt(s) / A ** 2)
    c_weighted = float(np.max(np.abs(q) / weight) * s ** 2 / (A ** 2 * math.log(s)))
    c_inner = float(np.max(np.abs(q[inner])) * math.sqrt(s) / A)
    return {"s": s, "C_global": c_global, "C_weighted": c_weighted,
            "C_inner": c_inner,
            "finite": all(map(math.isfinite, (c_global, c_weighted, c_inner)))}


def mode_ode_residuals(decs: list, params: ModelParams) -> dict:
    """Scaled finite-difference residuals of the three mode equations.

    The expanding mode should obey q0' ~ q0, the vector mode q1' ~ q1/2,
    and the neutral mode q2' ~ -2 q2 / s, with errors one power of s down.
    """
    if len(decs) < 5:
        raise InsufficientSamplesError("need at least 5 consecutive decompositions")
    s = np.array([d.s for d in decs])
    if np.any(np.diff(s) <= 0):
        raise ValueError("decompositions must be ordered in s")
    q0 = np.array([d.q0 for d in decs])
    q1 = np.array([np.max(np.abs(d.q1)) for d in decs])
    lam = np.array([d.q2[0, 0] for d in decs])
    dq0 = np.gradient(q0, s)
    dq1 = np.gradient(q1, s)
    dlam = np.gradient(lam, s)
    r0 = np.abs(dq0 - q0) * s ** 2
    r1 = np.abs(dq1 - 0.5 * q1) * s ** 2
    r2 = np.abs(dlam + 2.0 * lam / s) * s ** 3 / params.A
    return {
        "s": s.tolist(),
        "r0_scaled": r0.tolist(), "r1_scaled": r1.tolist(),
        "r2_scaled": r2.tolist(),
        "r0_max": float(np.max(r0)), "r1_max": float(np.max(r1)),
        "r2_max": float(np.max(r2)),
    }
