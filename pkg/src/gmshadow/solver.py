"""Time integration of the non-local reaction-diffusion equation to near-blowup.

The equation du/dt = Lap(u) - u + theta(t) u^p is advanced with the
diffusion and linear terms implicit (one tridiagonal solve per step) and
the reaction explicit with theta frozen at the step start.  The implicit
matrix is an M-matrix, so positivity is inherited up to round-off.  Steps
shrink adaptively like 1/(theta * sup(u)^(p-1)), the local blowup
timescale.

theta itself is an algebraic functional of u; its exact time derivative is
evaluated from the rescaled field U = theta^(1/(p-1)) u through the flow:
with I = mean(U^r) and a = gamma / (1 - r*gamma/(p-1)),

    theta'(t) = -gamma r I^(-a-1) * mean( Lap(U) U^(r-1) + U^(p-1+r) - U^r ),

where the Laplacian moment is taken in its zero-flux integration-by-parts
form (1-r) * mean(U^(r-2) |grad U|^2).  A finite difference of theta along
any trajectory reproduces this formula, which the tests exercise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gmshadow.grid import (RadialField, gradient, mean_power_integral,
                           sup_norm, volume_mean)
from gmshadow.params import ModelParams


class SingularThetaError(ValueError):
    """Mean integral vanished; the non-local factor is undefined."""


class SolverDivergenceError(RuntimeError):
    """The discrete solution left the admissible range."""


class FitRangeError(ValueError):
    """Trajectory lacks the dynamic range required by a fit."""


def theta_of_u(u: RadialField, params: ModelParams) -> float:
    """Non-local factor (mean of u^r)^(-gamma)."""
    mean = mean_power_integral(u, params.r, params.dim)
    if not mean > 0.0:
        raise SingularThetaError("mean of u^r must be positive")
    return mean ** (-params.gamma)


def theta_of_U(U: RadialField, params: ModelParams) -> float:
    """Non-local factor recovered from the rescaled field U."""
    exponent = params.theta_exponent_U
    mean = mean_power_integral(U, params.r, params.dim)
    if not mean > 0.0:
        raise SingularThetaError("mean of U^r must be positive")
    return mean ** exponent


def theta_prime(U: RadialField, params: ModelParams) -> float:
    """Exact d(theta)/dt evaluated on the rescaled field U."""
    p, r, gamma, dim = params.p, params.r, params.gamma, params.dim
    alpha = gamma / params.sigma
    mean_r = mean_power_integral(U, r, dim)
    if not mean_r > 0.0:
        raise SingularThetaError("mean of U^r must be positive")
    mean_pr = mean_power_integral(U, p - 1.0 + r, dim)
    if r == 1.0:
        lap_moment = 0.0
    else:
        grad = gradient(U).values
        lap_moment = (1.0 - r) * volume_mean(
            U.values ** (r - 2.0) * grad ** 2, U.grid, dim)
    return -gamma * r * mean_r ** (-alpha - 1.0) * (lap_moment + mean_pr - mean_r)


@dataclass
class SolverState:
    t: float
    u: RadialField
    theta: float
    dt: float
    step_index: int

    def __post_init__(self):
        if np.any(self.u.values < 0.0):
            raise ValueError("u must be non-negative")
        if not self.theta > 0.0:
            raise ValueError("theta must be positive")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")


def step(state: SolverState, params: ModelParams, dt: float | None = None) -> SolverState:
    """Advance one semi-implicit step; theta is frozen at the step start."""
    if dt is None:
        dt = state.dt
    u = state.u.values
    geom = state.u.grid.geometry(params.dim)
    rhs = u + dt * state.theta * u ** params.p
    if not np.all(np.isfinite(rhs)):
        raise SolverDivergenceError(
            f"non-finite reaction at t={state.t:.6e}, step {state.step_index}")
    new = geom.solve_shifted(1.0 + dt, dt, rhs)
    if not np.all(np.isfinite(new)):
        raise SolverDivergenceError(
            f"non-finite solve at t={state.t:.6e}, step {state.step_index}")
    lowest = new.min()
    if lowest < 0.0:
        if lowest < -1e-14:
            raise SolverDivergenceError(
                f"negative undershoot {lowest:.3e} at t={state.t:.6e}")
        new = np.where(new < 0.0, 0.0, new)
    u_field = RadialField(state.u.grid, new)
    return SolverState(t=state.t + dt, u=u_field,
                       theta=theta_of_u(u_field, params), dt=dt,
                       step_index=state.step_index + 1)


@dataclass
class TrajectoryRecord:
    """Per-step scalar history of a run."""

    step: list = field(default_factory=list)
    t: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    sup_u: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    theta_prime_fd: list = field(default_factory=list)
    theta_prime_formula: list = field(default_factory=list)
    T_est: float | None = None

    def append(self, **row):
        if self.t and row["t"] <= self.t[-1]:
            raise ValueError("trajectory times must be strictly increasing")
        for key, value in row.items():
            getattr(self, key).append(value)

    def asarray(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path) -> None:
        cols = ("step", "t", "dt", "sup_u", "theta",
                "theta_prime_fd", "theta_prime_formula")
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(len(self.t)):
                fh.write(",".join(f"{getattr(self, c)[i]:.17g}" for c in cols) + "\n")

    @classmethod
    def from_csv(cls, path) -> "TrajectoryRecord":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        rec = cls()
        for i, name in enumerate(("step", "t", "dt", "sup_u", "theta",
                                  "theta_prime_fd", "theta_prime_formula")):
            setattr(rec, name, data[:, i].tolist())
        return rec


@dataclass
class Snapshot:
    t: float
    u: RadialField
    theta: float
    theta_prime: float
    sup_u: float


@dataclass
class RunResult:
    trajectory: TrajectoryRecord
    snapshots: list
    blew_up: bool
    reason: str
    final: SolverState


def _next_level(sup: float) -> float:
    """Smallest half-decade level strictly above sup."""
    k = math.floor(2.0 * math.log10(sup) + 1e-12) + 1
    return 10.0 ** (k / 2.0)


def run_to_blowup(u0: RadialField, params: ModelParams, *,
                  c_dt: float = 1e-2, dt_max: float | None = None,
                  blowup_threshold: float = 1e8, t_max: float | None = None,
                  snapshots_per_halfdecade: bool = True,
                  max_steps: int = 2_000_000) -> RunResult:
    """Integrate until sup(u) crosses the threshold or time runs out.

    Snapshots are stored at t=0, at each half-decade crossing of sup(u),
    and at the final accepted state.  Reaching t_max without blowup is an
    outcome, not an error.
    """
    if dt_max is None:
        dt_max = 1e-4 * params.T
    if t_max is None:
        t_max = 4.0 * params.T

    state = SolverState(t=0.0, u=u0.copy(), theta=theta_of_u(u0, params),
                        dt=dt_max, step_index=0)
    traj = TrajectoryRecord()
    snapshots: list = []
    p = params.p
    theta_prev = None
    dt_prev = None

    def record(st: SolverState, sup: float, thp_formula: float):
        nonlocal theta_prev
        fd = 0.0 if theta_prev is None else (st.theta - theta_prev) / dt_prev
        traj.append(step=float(st.step_index), t=st.t, dt=st.dt, sup_u=sup,
                    theta=st.theta, theta_prime_fd=fd,
                    theta_prime_formula=thp_formula)
        theta_prev = st.theta

    def snap(st: SolverState, sup: float, thp: float):
        snapshots.append(Snapshot(t=st.t, u=st.u.copy(), theta=st.theta,
                                  theta_prime=thp, sup_u=sup))

    sup = sup_norm(state.u)
    U = RadialField(state.u.grid, state.theta ** (1.0 / (p - 1.0)) * state.u.values)
    thp = theta_prime(U, params)
    record(state, sup, thp)
    snap(state, sup, thp)
    level = _next_level(sup) if snapshots_per_halfdecade else math.inf

    blew_up = False
    reason = "t_max"
    while state.step_index < max_steps:
        dt = min(dt_max, c_dt / (state.theta * sup ** (p - 1.0)))
        if state.t + dt > t_max:
            dt = t_max - state.t
            if dt <= 0.0:
                break
        dt_prev = dt
        state = step(state, params, dt)
        sup = sup_norm(state.u)
        U = RadialField(state.u.grid, state.theta ** (1.0 / (p - 1.0)) * state.u.values)
        thp = theta_prime(U, params)
        record(state, sup, thp)
        if snapshots_per_halfdecade and sup >= level:
            snap(state, sup, thp)
            level = _next_level(sup)
        if sup >= blowup_threshold:
            blew_up = True
            reason = "threshold"
            break
        if state.t >= t_max:
            reason = "t_max"
            break
    else:
        reason = "max_steps"

    if not snapshots or snapshots[-1].t != state.t:
        snap(state, sup, thp)
    return RunResult(trajectory=traj, snapshots=snapshots, blew_up=blew_up,
                     reason=reason, final=state)


@dataclass
class BlowupFit:
    T_est: float
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    window: tuple


def estimate_blowup_time(traj: TrajectoryRecord, p: float,
                         decades: float = 3.0) -> BlowupFit:
    """Linear regression of sup(u)^(1-p) against t over the last decades.

    The fitted line crosses zero at the estimated blowup time; its slope
    approaches -(p-1) * theta near blowup.
    """
    sup = traj.asarray("sup_u")
    t = traj.asarray("t")
    if sup.size < 4 or sup[-1] / sup.min() < 10.0 ** 3 - 1e-9:
        raise FitRangeError("need at least three decades of sup growth")
    mask = sup >= sup[-1] * 10.0 ** (-decades)
    x, y = t[mask], sup[mask] ** (1.0 - p)
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return BlowupFit(T_est=float(-intercept / slope), slope=float(slope),
                     intercept=float(intercept), r_squared=r2,
                     n_points=int(mask.sum()), window=(float(x[0]), float(x[-1])))


def refine_blowup_time(traj: TrajectoryRecord, params: ModelParams,
                       decades: float = 0.5) -> float:
    """Sharpen the blowup-time estimate with the profile-peak relation.

    Similarity frames multiply any error in T by e^s, so the regression
    estimate is refined by inverting, row by row over the last half-decade,
    the peak law  sup(u) * theta^(1/(p-1)) * z^(1/(p-1)) = kappa (1 + N/(2p|ln z|))
    for z = T - t, and taking the median of the implied T values.
    """
    p, dim = params.p, params.dim
    kap = params.kappa
    sup = traj.asarray("sup_u")
    t = traj.asarray("t")
    theta = traj.asarray("theta")
    mask = sup >= sup[-1] * 10.0 ** (-decades)
    ts, sups, thetas = t[mask], sup[mask], theta[mask]
    implied = []
    for ti, ui, thi in zip(ts, sups, thetas):
        amp = thi ** (1.0 / (p - 1.0)) * ui
        z = (kap / amp) ** (p - 1.0)
        for _ in range(60):
            lnz = -math.log(z)
            if lnz <= 1.0:
                break
            z_new = (kap * (1.0 + dim / (2.0 * p * lnz)) / amp) ** (p - 1.0)
            if abs(z_new - z) <= 1e-18 * z:
                z = z_new
                break
            z = z_new
        implied.append(ti + z)
    return float(np.median(implied))
