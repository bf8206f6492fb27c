"""Gaussian-weighted Hermite machinery for the linearized drift operator.

The reference operator L = Lap - y.grad/2 + Id is self-adjoint on the
weighted space with density rho(y) = exp(-|y|^2/4) / (4 pi)^(N/2) and has
spectrum {1 - m/2}.  Its eigenpolynomials in one variable follow the
recurrence h_{m+1} = y h_m - 2 m h_{m-1}; products of those span the
N-dimensional eigenspaces.

Fields arriving from similarity frames are radial, so every multi-index
projection reduces to one-dimensional moment integrals against the radial
weight; parity kills all odd-degree projections exactly.  dim == 1 keeps
literal full-line semantics so that non-even test functions behave as on
the real line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline

from gmshadow.params import ModelParams
from gmshadow.profiles import chi

MAX_DEGREE = 6

_COEFFS = [np.array([1.0]), np.array([0.0, 1.0])]
while len(_COEFFS) <= MAX_DEGREE:
    m = len(_COEFFS) - 1
    nxt = np.zeros(m + 2)
    nxt[1:] += _COEFFS[m]
    nxt[:m] -= 2.0 * m * _COEFFS[m - 1]
    _COEFFS.append(nxt)


def hermite_coefficients(m: int) -> np.ndarray:
    """Ascending power coefficients of the degree-m eigenpolynomial."""
    if not 0 <= m <= MAX_DEGREE:
        raise ValueError(f"degree must lie in 0..{MAX_DEGREE}")
    return _COEFFS[m].copy()


def hermite(m: int, y):
    """Evaluate the degree-m eigenpolynomial."""
    return P.polyval(np.asarray(y, dtype=float), hermite_coefficients(m))


def hermite_norm_sq(beta) -> float:
    """Squared weighted norm; 2^m m! per one-dimensional factor."""
    if np.isscalar(beta):
        beta = (int(beta),)
    out = 1.0
    for b in beta:
        if not 0 <= b <= MAX_DEGREE:
            raise ValueError(f"degree must lie in 0..{MAX_DEGREE}")
        out *= 2.0 ** b * math.factorial(b)
    return out


def apply_L(coeffs: np.ndarray, dim: int = 1) -> np.ndarray:
    """Apply L = Lap - y.grad/2 + Id to a radial/1D polynomial (coefficient form).

    For dim == 1 this is h'' - y h'/2 + h.  For radial polynomials in
    higher dimension the Laplacian picks up (dim-1)/y * d/dy.
    """
    d1 = P.polyder(coeffs)
    d2 = P.polyder(coeffs, 2)
    out = P.polyadd(d2, coeffs)
    if dim > 1:
        # (dim-1)/y * d/dy of a polynomial with no constant slope at 0
        if d1.size > 1 and abs(d1[0]) > 0:
            raise ValueError("radial polynomial must have zero slope at 0")
        over_y = np.zeros(max(d1.size - 1, 1))
        over_y[: max(d1.size - 1, 0)] = d1[1:]
        out = P.polyadd(out, (dim - 1) * over_y)
    shift = np.zeros(d1.size + 1)
    shift[1:] = d1
    return P.polysub(out, 0.5 * shift)


class WeightedQuadrature:
    """Composite Gauss-Legendre rule for integrals against rho.

    dim == 1 integrates over [-y_max, y_max]; dim >= 2 integrates radially
    over [0, y_max] with the surface-area factor folded into the weights.
    The discarded tail mass beyond y_max = 20 is below 1e-20.
    """

    def __init__(self, dim: int, y_max: float = 20.0, panel_width: float = 0.25,
                 order: int = 12):
        if dim < 1:
            raise ValueError("dim must be at least 1")
        self.dim = dim
        self.y_max = y_max
        lo = -y_max if dim == 1 else 0.0
        edges = np.linspace(lo, y_max, int(round((y_max - lo) / panel_width)) + 1)
        gx, gw = np.polynomial.legendre.leggauss(order)
        mids = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        nodes = (mids[:, None] + half[:, None] * gx[None, :]).ravel()
        wts = (half[:, None] * gw[None, :]).ravel()
        if dim == 1:
            density = np.exp(-nodes ** 2 / 4.0) / math.sqrt(4.0 * math.pi)
        else:
            surf = 2.0 ** (1 - dim) / math.gamma(dim / 2.0)
            density = surf * np.abs(nodes) ** (dim - 1) * np.exp(-nodes ** 2 / 4.0)
        self.nodes = nodes
        self.weights = wts * density

    def integrate(self, f) -> float:
        values = f(self.nodes) if callable(f) else np.asarray(f, dtype=float)
        return float(np.dot(self.weights, values))

    def inner(self, f, g) -> float:
        fv = f(self.nodes) if callable(f) else np.asarray(f, dtype=float)
        gv = g(self.nodes) if callable(g) else np.asarray(g, dtype=float)
        return float(np.dot(self.weights, fv * gv))


_QUAD_CACHE: dict = {}


def get_quadrature(dim: int) -> WeightedQuadrature:
    quad = _QUAD_CACHE.get(dim)
    if quad is None:
        quad = WeightedQuadrature(dim)
        _QUAD_CACHE[dim] = quad
    return quad


def weighted_inner(f, g, dim: int) -> float:
    """Weighted inner product <f, g> against rho."""
    return get_quadrature(dim).inner(f, g)


def _as_callable(f, y=None):
    if callable(f):
        return f
    values = np.asarray(f, dtype=float)
    if y is None:
        raise ValueError("grid values need the matching y coordinates")
    return CubicSpline(np.asarray(y, dtype=float), values)


def _radial_moments(fb, quad: WeightedQuadrature, powers=(0, 2, 4)) -> dict:
    vals = fb(quad.nodes) if callable(fb) else np.asarray(fb, dtype=float)
    return {k: float(np.dot(quad.weights, vals * quad.nodes ** k)) for k in powers}


def project_beta(f, beta, s: float, K0: float, dim: int | None = None, y=None) -> float:
    """Projection of the banded part of f onto the eigenpolynomial h_beta.

    Normalized by the squared norm, so project_beta(h_beta, beta) == 1 once
    the band cutoff sits beyond the weight's effective support.  For
    dim >= 2 the field must be radial; parity then zeroes every projection
    with an odd index.
    """
    fc = _as_callable(f, y)
    if np.isscalar(beta):
        dim = 1 if dim is None else dim
        if dim != 1:
            raise ValueError("scalar index requires dim == 1")
        beta_t = (int(beta),)
    else:
        beta_t = tuple(int(b) for b in beta)
        dim = len(beta_t) if dim is None else dim
        if len(beta_t) != dim:
            raise ValueError("index length must equal dim")
    order = sum(beta_t)
    if order > 4 and dim > 1:
        raise ValueError("multi-index projections supported up to degree 4")

    quad = get_quadrature(dim)
    banded = lambda yy: fc(yy) * chi(np.abs(yy), s, K0)

    if dim == 1:
        m = beta_t[0]
        val = quad.integrate(lambda yy: banded(yy) * hermite(m, yy))
        return val / hermite_norm_sq(m)

    if any(b % 2 for b in beta_t):
        return 0.0
    moments = _radial_moments(banded, quad)
    norm = hermite_norm_sq(beta_t)
    n = dim
    nz = sorted((b for b in beta_t if b), reverse=True)
    if not nz:
        raw = moments[0]
    elif nz == [2]:
        raw = moments[2] / n - 2.0 * moments[0]
    elif nz == [4]:
        raw = 3.0 * moments[4] / (n * (n + 2)) - 12.0 * moments[2] / n + 12.0 * moments[0]
    elif nz == [2, 2]:
        raw = moments[4] / (n * (n + 2)) - 4.0 * moments[2] / n + 4.0 * moments[0]
    else:
        raise ValueError(f"unsupported even multi-index {beta_t}")
    return raw / norm


@dataclass
class SpectralDecomposition:
    """Mode split of a field in the weighted Hermite frame.

    q0, q1, q2 are the scalar/vector/matrix projections of the banded part;
    q_minus and q_perp are the grid residuals after removing modes of degree
    <= 2 and <= 1 respectively; q_e is the outer part beyond the band.
    """

    s: float
    y: np.ndarray
    q0: float
    q1: np.ndarray
    q2: np.ndarray
    q_minus: np.ndarray
    q_perp: np.ndarray
    q_e: np.ndarray
    norms: dict


def decompose(f_values, y, s: float, params: ModelParams) -> SpectralDecomposition:
    """Split grid values into band modes, inner residuals, and outer part."""
    y = np.asarray(y, dtype=float)
    f_values = np.asarray(f_values, dtype=float)
    dim = params.dim
    quad = get_quadrature(dim)
    chi_grid = chi(np.abs(y), s, params.K0)
    fb_grid = chi_grid * f_values
    fe_grid = (1.0 - chi_grid) * f_values

    spline = CubicSpline(y, fb_grid)
    if dim == 1:
        if y.min() >= 0.0:
            raise ValueError("dim == 1 decomposition needs a full-line grid")
        node_vals = spline(quad.nodes)
    else:
        node_vals = spline(np.clip(quad.nodes, y[0], y[-1]))
    q0 = float(np.dot(quad.weights, node_vals))
    q1 = np.zeros(dim)
    q2 = np.zeros((dim, dim))
    if dim == 1:
        q1[0] = float(np.dot(quad.weights, node_vals * quad.nodes)) / 2.0
        lam = float(np.dot(quad.weights, node_vals * hermite(2, quad.nodes))) / 8.0
        q2[0, 0] = lam
        quad_part = q0 + q1[0] * y + lam * (y ** 2 - 2.0)
        lin_part = q0 + q1[0] * y
    else:
        m2 = float(np.dot(quad.weights, node_vals * quad.nodes ** 2))
        lam = (m2 / dim - 2.0 * q0) / 8.0
        q2 = lam * np.eye(dim)
        quad_part = q0 + lam * (y ** 2 - 2.0 * dim)
        lin_part = np.full_like(y, q0)

    q_minus = fb_grid - quad_part
    q_perp = fb_grid - lin_part
    minus_spline = CubicSpline(y, q_minus)
    if dim == 1:
        mnodes = minus_spline(quad.nodes)
    else:
        mnodes = minus_spline(np.clip(quad.nodes, y[0], y[-1]))
    norms = {
        "q_minus_weighted": float(math.sqrt(max(np.dot(quad.weights, mnodes ** 2), 0.0))),
        "q_e_sup": float(np.max(np.abs(fe_grid))),
    }
    return SpectralDecomposition(s=float(s), y=y, q0=q0, q1=q1, q2=q2,
                                 q_minus=q_minus, q_perp=q_perp, q_e=fe_grid,
                                 norms=norms)


def reconstruct(dec: SpectralDecomposition) -> np.ndarray:
    """Sum the parts back; exact on the grid by construction."""
    y = dec.y
    dim = dec.q1.size
    if dim == 1:
        quad_part = dec.q0 + dec.q1[0] * y + dec.q2[0, 0] * (y ** 2 - 2.0)
    else:
        lam = dec.q2[0, 0]
        quad_part = dec.q0 + lam * (y ** 2 - 2.0 * dim)
    return quad_part + dec.q_minus + dec.q_e


def grad_perp(f_values, y, s: float, params: ModelParams) -> np.ndarray:
    """Gradient of f with its band part's degree-<=1 modes removed.

    Returns the pointwise magnitude on the grid.  For radial fields the
    gradient is f'(|y|) along the radial direction and the only surviving
    low mode is the shared linear coefficient.
    """
    y = np.asarray(y, dtype=float)
    f_values = np.asarray(f_values, dtype=float)
    dim = params.dim
    quad = get_quadrature(dim)
    deriv = CubicSpline(y, f_values).derivative()
    g_grid = deriv(y)
    chi_grid = chi(np.abs(y), s, params.K0)
    if dim == 1:
        gb = lambda t: deriv(t) * chi(np.abs(t), s, params.K0)
        c0 = quad.integrate(gb)
        c1 = quad.integrate(lambda t: gb(t) * t) / 2.0
        return np.abs(chi_grid * g_grid - c0 - c1 * y)
    nodes = np.clip(quad.nodes, y[0], y[-1])
    gb_nodes = deriv(nodes) * chi(nodes, s, params.K0)
    c1 = float(np.dot(quad.weights, gb_nodes * quad.nodes)) / (2.0 * dim)
    return np.abs(chi_grid * g_grid - c1 * y)


def decomposition_to_dict(dec: SpectralDecomposition) -> dict:
    return {
        "s": dec.s,
        "q0": dec.q0,
        "q1": dec.q1.tolist(),
        "q2": dec.q2.tolist(),
        "norms": dec.norms,
    }
