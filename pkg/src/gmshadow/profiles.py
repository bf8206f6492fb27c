"""Closed-form radial profiles, the flat-envelope ODE, and smooth cutoffs.

All functions are pure and broadcast over numpy arrays.  The profile
derivatives are evaluated analytically; downstream residual checks rely on
that (finite differencing would drown the small remainders in noise).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "kappa", "phi0", "phi", "phi_s", "phi_radial_deriv", "phi_laplacian",
    "hat_U", "H_star", "final_profile_shape", "chi0", "chi0_prime",
    "chi0_second", "chi1", "psi_M0", "chi",
]


def kappa(p: float) -> float:
    """Flat blowup amplitude (p-1)^(-1/(p-1))."""
    return float((p - 1.0) ** (-1.0 / (p - 1.0)))


def _slope_coeff(p: float) -> float:
    """Quadratic coefficient (p-1)^2/(4p) of the profile bracket."""
    return (p - 1.0) ** 2 / (4.0 * p)


def phi0(z, p: float):
    """Universal intermediate profile in the slow radial variable."""
    z = np.asarray(z, dtype=float)
    bracket = p - 1.0 + _slope_coeff(p) * z * z
    return bracket ** (-1.0 / (p - 1.0))


def phi(y, s, p: float, dim: int):
    """Similarity-frame profile: phi0(y/sqrt(s)) core plus the 1/s shift."""
    if np.any(np.asarray(s) <= 1.0):
        raise ValueError("similarity time s must exceed 1")
    y = np.asarray(y, dtype=float)
    bracket = p - 1.0 + _slope_coeff(p) * y * y / s
    return bracket ** (-1.0 / (p - 1.0)) + kappa(p) * dim / (2.0 * p * s)


def phi_s(y, s, p: float, dim: int):
    """Analytic d(phi)/ds at fixed y."""
    y = np.asarray(y, dtype=float)
    a = _slope_coeff(p)
    e = 1.0 / (p - 1.0)
    bracket = p - 1.0 + a * y * y / s
    return e * a * y * y / s ** 2 * bracket ** (-e - 1.0) \
        - kappa(p) * dim / (2.0 * p * s ** 2)


def phi_radial_deriv(y, s, p: float):
    """Analytic d(phi)/d|y|."""
    y = np.asarray(y, dtype=float)
    a = _slope_coeff(p)
    e = 1.0 / (p - 1.0)
    bracket = p - 1.0 + a * y * y / s
    return -2.0 * e * a * y / s * bracket ** (-e - 1.0)


def phi_laplacian(y, s, p: float, dim: int):
    """Analytic radial Laplacian of phi, regular at y = 0."""
    y = np.asarray(y, dtype=float)
    a = _slope_coeff(p)
    e = 1.0 / (p - 1.0)
    bracket = p - 1.0 + a * y * y / s
    return -2.0 * e * a * dim / s * bracket ** (-e - 1.0) \
        + 4.0 * e * (e + 1.0) * a ** 2 * y * y / s ** 2 * bracket ** (-e - 2.0)


def hat_U(tau, p: float, K0: float):
    """Flat envelope solving dU/dtau = U^p from the plateau value at tau=0."""
    tau = np.asarray(tau, dtype=float)
    bracket = (p - 1.0) * (1.0 - tau) + (p - 1.0) ** 2 * K0 ** 2 / (64.0 * p)
    if np.any(bracket <= 0.0):
        raise ValueError("tau beyond the envelope's solvability bound")
    return bracket ** (-1.0 / (p - 1.0))


def final_profile_shape(x, p: float):
    """Singular end-state shape [(p-1)^2 x^2 / (8p |ln x|)]^(-1/(p-1)), x in (0,1)."""
    x = np.asarray(x, dtype=float)
    c = (p - 1.0) ** 2 / (8.0 * p)
    lnx = -np.log(x)
    return (c * x * x / lnx) ** (-1.0 / (p - 1.0))


_singular_branch = final_profile_shape


def _singular_branch_deriv(x, p: float):
    s_val = _singular_branch(x, p)
    lnx = -np.log(x)
    return -s_val * (2.0 * lnx + 1.0) / ((p - 1.0) * x * lnx)


def H_star(x, p: float, boundary_distance: float):
    """Far-field cap of the initial data.

    Singular final-profile branch up to min(d/4, 1/2), identically 1 from
    d/2 outward, and a cubic Hermite blend (values and first derivatives
    matched at both junctions) in between.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x == 0.0):
        raise ValueError("singular at the origin")
    if np.any(x < 0.0):
        raise ValueError("radial coordinate must be positive")
    d = float(boundary_distance)
    x1 = min(d / 4.0, 0.5)
    x2 = d / 2.0
    h1 = float(_singular_branch(x1, p))
    m1 = float(_singular_branch_deriv(x1, p))
    width = x2 - x1

    t = np.clip((x - x1) / width, 0.0, 1.0)
    # cubic Hermite basis on [x1, x2]; right endpoint value 1, slope 0
    h00 = 2 * t ** 3 - 3 * t ** 2 + 1
    h10 = t ** 3 - 2 * t ** 2 + t
    h01 = -2 * t ** 3 + 3 * t ** 2
    blend = h00 * h1 + h10 * width * m1 + h01 * 1.0

    out = np.where(x <= x1, _singular_branch(np.minimum(x, x1), p),
                   np.where(x >= x2, 1.0, blend))
    return out if out.shape else float(out)


# -- cutoff family ---------------------------------------------------------

def chi0(x):
    """Smooth plateau: 1 on [0,1], 0 from 2 on, exponential bridge between."""
    x = np.abs(np.asarray(x, dtype=float))
    u = x - 1.0
    inner = np.clip(1.0 - u * u, 1e-300, None)
    with np.errstate(over="ignore"):
        bridge = np.exp(1.0 - 1.0 / inner)
    out = np.where(x <= 1.0, 1.0, np.where(x >= 2.0, 0.0, bridge))
    return out if out.shape else float(out)


def chi0_prime(x):
    """First derivative of chi0 (zero off the bridge)."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    on = (x > 1.0) & (x < 2.0)
    u = x[on] - 1.0
    inner = 1.0 - u * u
    out[on] = np.exp(1.0 - 1.0 / inner) * (-2.0 * u / inner ** 2)
    return out if out.shape else float(out)


def chi0_second(x):
    """Second derivative of chi0 (zero off the bridge)."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    on = (x > 1.0) & (x < 2.0)
    u = x[on] - 1.0
    inner = 1.0 - u * u
    g = -2.0 * u / inner ** 2
    gp = -2.0 * (1.0 + 3.0 * u * u) / inner ** 3
    out[on] = np.exp(1.0 - 1.0 / inner) * (gp + g * g)
    return out if out.shape else float(out)


def chi1(x, T: float):
    """Physical-space cutoff with plateau up to sqrt(T)|ln T|."""
    scale = math.sqrt(T) * abs(math.log(T))
    return chi0(np.asarray(x, dtype=float) / scale)


def psi_M0(y, s, M0: float):
    """Similarity-frame cutoff frozen at physical scale 1/M0."""
    return chi0(M0 * np.asarray(y, dtype=float) * np.exp(-s / 2.0))


def chi(y, s, K0: float):
    """Inner/outer splitting cutoff at the K0*sqrt(s) shoulder."""
    if np.any(np.asarray(s) <= 0.0):
        raise ValueError("s must be positive")
    return chi0(np.asarray(y, dtype=float) / (K0 * np.sqrt(s)))
