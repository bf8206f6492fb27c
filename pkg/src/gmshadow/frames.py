"""Similarity-variable snapshots and the linearized-equation terms.

A physical snapshot U(., t) maps to the frame (y, s) with

    s = -ln(T - t),  y = x / sqrt(T - t),  W(y, s) = (T - t)^(1/(p-1)) U(x, t),

is localized by the frozen cutoff psi (w = W psi inside the rescaled ball,
0 outside), and linearized around the profile (q = w - phi).  The
evaluators for the potential V, the quadratic remainder B, the profile
residual R, and the cutoff commutator F use the analytic profile and
cutoff derivatives throughout; R in particular is a small residual that
finite differencing would bury in noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from gmshadow.grid import RadialField
from gmshadow.params import ModelParams
from gmshadow.profiles import (chi, chi0, chi0_prime, chi0_second, phi,
                               phi_laplacian, phi_radial_deriv, phi_s, psi_M0)


class TransformError(ValueError):
    """Snapshot cannot be mapped into the requested frame."""


class DomainError(ValueError):
    """Arguments outside an evaluator's domain."""


@dataclass
class SimilarityFrame:
    """One snapshot in similarity variables on a fixed y grid."""

    s: float
    y: np.ndarray
    W: np.ndarray
    theta_bar: float
    theta_bar_prime: float
    t: float
    T_est: float
    w: np.ndarray | None = None
    q: np.ndarray | None = None


def default_y_grid(params: ModelParams, s_max: float, nodes: int = 2048) -> np.ndarray:
    """Uniform frame grid covering the band and the initial cutoff support."""
    y_max = max(2.2 * params.K0 * math.sqrt(s_max),
                2.0 * math.exp(params.s0 / 2.0) / params.M0)
    return np.linspace(0.0, y_max, nodes)


def U_from_u(u: RadialField, theta: float, p: float) -> RadialField:
    """Rescale the physical field: U = theta^(1/(p-1)) u."""
    return RadialField(u.grid, theta ** (1.0 / (p - 1.0)) * u.values)


def u_from_U(U: RadialField, theta: float, p: float) -> RadialField:
    """Inverse rescaling."""
    return RadialField(U.grid, theta ** (-1.0 / (p - 1.0)) * U.values)


def to_similarity(U: RadialField, t: float, T_est: float, p: float,
                  y_grid: np.ndarray, theta_bar: float = 1.0,
                  theta_prime: float = 0.0) -> SimilarityFrame:
    """Map a snapshot onto the fixed y grid by monotone interpolation.

    Beyond the rescaled ball the profile W is extended by its wall value
    (the localized fields are cut to zero there anyway).
    """
    if t >= T_est:
        raise TransformError("snapshot time must precede the blowup estimate")
    z = T_est - t
    s = -math.log(z)
    scale = z ** (1.0 / (p - 1.0))
    y_phys = U.grid.nodes / math.sqrt(z)
    W_phys = scale * U.values
    interp = PchipInterpolator(y_phys, W_phys, extrapolate=False)
    W = interp(np.clip(y_grid, y_phys[0], y_phys[-1]))
    # theta'(t) maps to d(theta_bar)/ds with ds = dt / (T - t)
    return SimilarityFrame(s=s, y=np.asarray(y_grid, dtype=float), W=W,
                           theta_bar=theta_bar, theta_bar_prime=theta_prime * z,
                           t=t, T_est=T_est)


def build_w_q(frame: SimilarityFrame, params: ModelParams) -> SimilarityFrame:
    """Attach the localized field w = W psi (0 outside the rescaled ball)
    and the remainder q = w - phi."""
    inside = frame.y <= math.exp(frame.s / 2.0) * params.radius
    psi = psi_M0(frame.y, frame.s, params.M0)
    frame.w = np.where(inside, frame.W * psi, 0.0)
    frame.q = frame.w - phi(frame.y, frame.s, params.p, params.dim)
    return frame


def potential_V(y, s: float, p: float, dim: int):
    """Linearization potential p (phi^(p-1) - 1/(p-1))."""
    if np.any(np.asarray(s) <= 1.0):
        raise DomainError("s must exceed 1")
    return p * (phi(y, s, p, dim) ** (p - 1.0) - 1.0 / (p - 1.0))


def nonlinear_B(q, y, s: float, p: float, dim: int = 0):
    """Quadratic remainder (q + phi)^p - phi^p - p phi^(p-1) q."""
    base = phi(y, s, p, dim)
    total = np.asarray(q, dtype=float) + base
    if float(p) != int(p) and np.any(total < 0.0):
        raise DomainError("q + phi must stay non-negative for fractional p")
    return total ** p - base ** p - p * base ** (p - 1.0) * np.asarray(q, dtype=float)


def remainder_R(y, s: float, p: float, dim: int):
    """Profile residual -phi_s + Lap(phi) - y.grad(phi)/2 - phi/(p-1) + phi^p.

    Evaluated from the analytic closed form; the 1/s profile shift makes the
    residual at y = 0 of order 1/s^2.
    """
    if np.any(np.asarray(s) <= 1.0):
        raise DomainError("s must exceed 1")
    y = np.asarray(y, dtype=float)
    base = phi(y, s, p, dim)
    return (-phi_s(y, s, p, dim) + phi_laplacian(y, s, p, dim)
            - 0.5 * y * phi_radial_deriv(y, s, p)
            - base / (p - 1.0) + base ** p)


def _psi_pieces(y, s: float, params: ModelParams):
    """psi and its frame derivatives; the advection and s derivatives cancel."""
    u = params.M0 * np.asarray(y, dtype=float) * math.exp(-s / 2.0)
    scale = params.M0 * math.exp(-s / 2.0)
    psi = chi0(u)
    dpsi = chi0_prime(u) * scale
    d2psi = chi0_second(u) * scale ** 2
    ds_psi = chi0_prime(u) * u * (-0.5)
    return psi, dpsi, d2psi, ds_psi


def F_term(frame: SimilarityFrame, params: ModelParams) -> np.ndarray:
    """Cutoff commutator of the localization, zero outside the rescaled ball."""
    if frame.w is None:
        raise ValueError("frame needs w; call build_w_q first")
    y, s = frame.y, frame.s
    p, dim = params.p, params.dim
    psi, dpsi, d2psi, ds_psi = _psi_pieces(y, s, params)
    lap_psi = np.empty_like(y)
    positive = y > 0
    lap_psi[positive] = d2psi[positive] + (dim - 1) / y[positive] * dpsi[positive]
    lap_psi[~positive] = dim * d2psi[~positive]
    grad_W = np.gradient(frame.W, y)
    inside = y <= math.exp(s / 2.0) * params.radius
    commutator = (frame.W * (ds_psi - lap_psi + 0.5 * y * dpsi)
                  - 2.0 * dpsi * grad_W
                  + psi * frame.W ** p - frame.w ** p)
    return np.where(inside, commutator, 0.0)


def G_term(frame: SimilarityFrame, params: ModelParams) -> np.ndarray:
    """Drift-plus-commutator forcing of the linearized equation."""
    if frame.q is None:
        raise ValueError("frame needs q; call build_w_q first")
    p, dim = params.p, params.dim
    base = phi(frame.y, frame.s, p, dim)
    drift = (frame.theta_bar_prime / ((p - 1.0) * frame.theta_bar)
             - math.exp(-frame.s))
    return drift * (frame.q + base) + F_term(frame, params)


def verify_term_bounds(frame: SimilarityFrame, params: ModelParams) -> dict:
    """Frame-local sizes of V, B, R, G against their expected scalings."""
    y, s = frame.y, frame.s
    p, dim = params.p, params.dim
    V = potential_V(y, s, p, dim)
    sup_V = float(np.max(np.abs(V)))
    expansion = np.abs(V + (y ** 2 - 2.0 * dim) / (4.0 * s)) / (1.0 + y ** 4)
    v_expansion_scaled = float(np.max(expansion) * s ** 2)

    report = {
        "s": s,
        "sup_V": sup_V,
        "v_expansion_scaled": v_expansion_scaled,
    }
    if frame.q is not None:
        chi_band = chi(y, s, params.K0)
        B = nonlinear_B(frame.q, y, s, p, dim)
        q_sq = np.maximum(frame.q ** 2, 1e-300)
        report["sup_chiB_over_q2"] = float(np.max(np.abs(chi_band * B) / q_sq))
        inner = y <= params.K0 * math.sqrt(s)
        R = remainder_R(y, s, p, dim)
        report["sup_R_inner_scaled"] = float(np.max(np.abs(R[inner])) * s)
        report["sup_G"] = float(np.max(np.abs(G_term(frame, params))))
    return report


def frame_to_csv(frame: SimilarityFrame, params: ModelParams, path) -> None:
    """Frame CSV with columns y, W, w, q, V, R."""
    V = potential_V(frame.y, frame.s, params.p, params.dim)
    R = remainder_R(frame.y, frame.s, params.p, params.dim)
    w = frame.w if frame.w is not None else np.zeros_like(frame.y)
    q = frame.q if frame.q is not None else np.zeros_like(frame.y)
    with open(path, "w") as fh:
        fh.write("y,W,w,q,V,R\n")
        for row in zip(frame.y, frame.W, w, q, V, R):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def frame_sidecar(frame: SimilarityFrame, report: dict) -> dict:
    return {
        "s": frame.s,
        "t": frame.t,
        "T_est": frame.T_est,
        "theta_bar": frame.theta_bar,
        "theta_bar_prime": frame.theta_bar_prime,
        "term_bounds": report,
    }


def write_frame(frame: SimilarityFrame, params: ModelParams, csv_path,
                json_path) -> dict:
    report = verify_term_bounds(frame, params)
    frame_to_csv(frame, params, csv_path)
    sidecar = frame_sidecar(frame, report)
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return sidecar
