"""Explicit initial data entering the trapping set at time zero.

The construction glues the similarity profile (plus a two-parameter bump
in the slow variable) onto the singular far-field cap:

    U0(x) = T^(-1/(p-1)) [ phi(x/sqrt(T), s0)
                           + (d0 + d1 z0) chi0(32 |z0| / K0) ] chi1(x)
            + H*(x) (1 - chi1(x)),        z0 = x / sqrt(T |ln T|),

with s0 = -ln T.  The pair (d0, d1) moves only the two expanding modes of
the linearized flow; the induced map to the initial mode coordinates is
affine.  In the radial setting d1 acts along the radius through a signed
magnitude and the vector mode projections vanish identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gmshadow.frames import to_similarity
from gmshadow.grid import RadialField, RadialGrid
from gmshadow.hermite import decompose
from gmshadow.params import ModelParams
from gmshadow.profiles import H_star, chi0, chi1, phi, psi_M0


class InitialDataError(ValueError):
    """Constructed data violates an admissibility constraint."""


class InternalConsistencyError(RuntimeError):
    """Direct similarity forms disagree with the transformed field."""


@dataclass(frozen=True)
class InitialDataSpec:
    """Bump amplitudes, target time, and model constants for the data."""

    params: ModelParams
    d0: float = 0.0
    d1: float = 0.0   # signed radial magnitude of the linear bump
    T: float | None = None

    def __post_init__(self):
        if abs(self.d0) > 2.0 or abs(self.d1) > 2.0:
            raise InitialDataError("bump amplitudes must satisfy |d| <= 2")
        if self.T is None:
            object.__setattr__(self, "T", self.params.T)
        if not 0.0 < self.T < 1.0:
            raise InitialDataError("target time must lie in (0, 1)")

    @property
    def s0(self) -> float:
        return -math.log(self.T)

    def to_dict(self) -> dict:
        return {"d0": self.d0, "d1": self.d1, "T": self.T}


def _assemble(x: np.ndarray, spec: InitialDataSpec) -> np.ndarray:
    """Evaluate U0 on physical radii x (vectorized, origin-safe)."""
    params = spec.params
    p, dim, K0, T = params.p, params.dim, params.K0, spec.T
    s0 = spec.s0
    z0 = x / math.sqrt(T * abs(math.log(T)))
    y0 = x / math.sqrt(T)
    bump = (spec.d0 + spec.d1 * z0) * chi0(32.0 * z0 / K0)
    inner = T ** (-1.0 / (p - 1.0)) * (phi(y0, s0, p, dim) + bump)
    c1 = chi1(x, T)
    outer = np.zeros_like(x)
    far = c1 < 1.0
    if np.any(far):
        outer[far] = H_star(x[far], p, params.radius) * (1.0 - c1[far])
    return inner * c1 + outer


def build_initial(spec: InitialDataSpec, grid: RadialGrid) -> RadialField:
    """Construct U0 on the grid; rejects data that dip below zero."""
    values = _assemble(grid.nodes, spec)
    if np.any(values < 0.0):
        worst = int(np.argmin(values))
        raise InitialDataError(
            f"negative initial data at radius {grid.nodes[worst]:.6g} "
            f"(value {values[worst]:.6g})")
    return RadialField(grid, values)


def initial_similarity_forms(spec: InitialDataSpec, grid: RadialGrid,
                             y_grid: np.ndarray,
                             cross_check_tol: float = 1e-6) -> dict:
    """Evaluate W, w, q at s0 directly on the frame grid.

    The direct forms are cross-checked against the transform of the
    physical field; disagreement beyond tolerance is an internal error.
    """
    params = spec.params
    p, dim, K0, T = params.p, params.dim, params.K0, spec.T
    s0 = spec.s0
    y0 = np.asarray(y_grid, dtype=float)
    x = y0 * math.sqrt(T)
    z0 = y0 / math.sqrt(s0)
    bump = (spec.d0 + spec.d1 * z0) * chi0(32.0 * z0 / K0)
    c1 = chi1(x, T)
    far = c1 < 1.0
    outer = np.zeros_like(y0)
    if np.any(far):
        outer[far] = T ** (1.0 / (p - 1.0)) * H_star(x[far], p, params.radius) \
            * (1.0 - c1[far])
    W = (phi(y0, s0, p, dim) + bump) * c1 + outer
    inside = y0 <= math.exp(s0 / 2.0) * params.radius
    w = np.where(inside, W * psi_M0(y0, s0, params.M0), 0.0)
    q = w - phi(y0, s0, p, dim)

    U0 = build_initial(spec, grid)
    frame = to_similarity(U0, 0.0, T, p, y0)
    scale = float(np.max(np.abs(W)))
    mismatch = float(np.max(np.abs(frame.W - W))) / scale
    if mismatch > cross_check_tol:
        raise InternalConsistencyError(
            f"direct similarity form deviates from transform by {mismatch:.3e} "
            f"relative (tolerance {cross_check_tol:.1e})")
    return {"s0": s0, "W": W, "w": w, "q": q, "mismatch": mismatch}


def _direct_q(spec: InitialDataSpec, y_grid: np.ndarray) -> np.ndarray:
    """q(., s0) from the closed forms alone (no physical grid)."""
    params = spec.params
    p, dim, K0, T = params.p, params.dim, params.K0, spec.T
    s0 = spec.s0
    y0 = np.asarray(y_grid, dtype=float)
    x = y0 * math.sqrt(T)
    z0 = y0 / math.sqrt(s0)
    bump = (spec.d0 + spec.d1 * z0) * chi0(32.0 * z0 / K0)
    c1 = chi1(x, T)
    far = c1 < 1.0
    outer = np.zeros_like(y0)
    if np.any(far):
        outer[far] = T ** (1.0 / (p - 1.0)) * H_star(x[far], p, params.radius) \
            * (1.0 - c1[far])
    W = (phi(y0, s0, p, dim) + bump) * c1 + outer
    inside = y0 <= math.exp(s0 / 2.0) * params.radius
    w = np.where(inside, W * psi_M0(y0, s0, params.M0), 0.0)
    return w - phi(y0, s0, p, dim)


def gamma_y_grid(params: ModelParams, nodes: int = 3000) -> np.ndarray:
    span = 2.2 * params.K0 * math.sqrt(params.s0)
    return np.linspace(0.0, span, nodes)


def gamma_map(d0: float, d1: float, T: float, params: ModelParams,
              y_grid: np.ndarray | None = None):
    """Map bump amplitudes to the initial mode coordinates (q0, q1)."""
    spec = InitialDataSpec(params=params, d0=d0, d1=d1, T=T)
    if y_grid is None:
        y_grid = gamma_y_grid(params)
    q = _direct_q(spec, y_grid)
    dec = decompose(q, y_grid, spec.s0, params)
    return dec.q0, dec.q1.copy()


def gamma_box(params: ModelParams, T: float, A_box: float = 1.0):
    """Amplitude box whose image fills the target mode box [-A/s0^2, A/s0^2].

    The map is affine, so the box follows from the slope and offset of the
    q0 component; the vector component is identically zero in the radial
    setting.
    """
    s0 = -math.log(T)
    target = A_box / s0 ** 2
    q0_at_0, _ = gamma_map(0.0, 0.0, T, params)
    probe = 0.5
    q0_at_probe, _ = gamma_map(probe, 0.0, T, params)
    slope = (q0_at_probe - q0_at_0) / probe
    d_lo = (-target - q0_at_0) / slope
    d_hi = (target - q0_at_0) / slope
    return {"d0_range": (min(d_lo, d_hi), max(d_lo, d_hi)),
            "q0_slope": slope, "q0_offset": q0_at_0, "target": target}
