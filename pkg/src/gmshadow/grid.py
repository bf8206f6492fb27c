"""Graded radial meshes on the ball with a conservative radial Laplacian,
shell-volume quadrature for mean integrals, and the Neumann heat semigroup.

The Laplacian is discretized in divergence form,

    Lap(f)_i = [A(i+1/2) (f_{i+1}-f_i)/h_{i+1} - A(i-1/2) (f_i-f_{i-1})/h_i] / V_i,

with exact shell volumes V_i and face areas A = rho^(dim-1).  Fluxes
telescope, so the volume-weighted mean is conserved to round-off by the
heat semigroup, the zero-area face at rho=0 reproduces the smooth-radial
limit dim * f''(0), and the zero-flux face at rho=R is the Neumann wall.
The same volumes weight the mean integrals, which makes constant fields
integrate exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded


class GridError(ValueError):
    """Invalid mesh sizing request."""


class DomainError(ValueError):
    """Field values outside the operation's domain."""


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing radial nodes 0 = rho_0 < ... < rho_M = radius."""

    nodes: np.ndarray
    radius: float
    ratio: float = 1.0
    _geom_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 64:
            raise GridError("need at least 64 nodes")
        if nodes[0] != 0.0:
            raise GridError("first node must be exactly 0")
        if nodes[-1] != self.radius:
            raise GridError("last node must be exactly the radius")
        if np.any(np.diff(nodes) <= 0.0):
            raise GridError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @property
    def node_count(self) -> int:
        return self.nodes.size

    def geometry(self, dim: int) -> "RadialGeometry":
        geom = self._geom_cache.get(dim)
        if geom is None:
            geom = RadialGeometry(self, dim)
            self._geom_cache[dim] = geom
        return geom


class RadialGeometry:
    """Per-dimension faces, shell volumes, and Laplacian stencil of a grid."""

    def __init__(self, grid: RadialGrid, dim: int):
        if dim < 1:
            raise GridError("dim must be at least 1")
        nodes = grid.nodes
        self.dim = dim
        self.h = np.diff(nodes)
        faces = np.empty(nodes.size + 1)
        faces[0] = 0.0
        faces[-1] = grid.radius
        faces[1:-1] = 0.5 * (nodes[:-1] + nodes[1:])
        self.faces = faces
        self.volumes = (faces[1:] ** dim - faces[:-1] ** dim) / dim
        self.areas = faces[1:-1] ** (dim - 1)   # interior faces only
        # tridiagonal Laplacian rows: lower, diag, upper
        n = nodes.size
        flux = self.areas / self.h              # A(i+1/2)/h_{i+1}
        upper = np.zeros(n)
        lower = np.zeros(n)
        upper[:-1] = flux / self.volumes[:-1]
        lower[1:] = flux / self.volumes[1:]
        self.lap_upper = upper
        self.lap_lower = lower
        self.lap_diag = -(upper + lower)

    def laplacian_apply(self, values: np.ndarray) -> np.ndarray:
        # flux form: exact zero on constants, fluxes telescope exactly
        flux = self.areas * np.diff(values) / self.h
        out = np.empty_like(values)
        out[0] = flux[0] / self.volumes[0]
        out[1:-1] = np.diff(flux) / self.volumes[1:-1]
        out[-1] = -flux[-1] / self.volumes[-1]
        return out

    def solve_shifted(self, alpha: float, beta: float, rhs: np.ndarray) -> np.ndarray:
        """Solve (alpha*I - beta*Lap) x = rhs with the banded factorization."""
        n = rhs.size
        ab = np.zeros((3, n))
        ab[0, 1:] = -beta * self.lap_upper[:-1]
        ab[1, :] = alpha - beta * self.lap_diag
        ab[2, :-1] = -beta * self.lap_lower[1:]
        return solve_banded((1, 1), ab, rhs)


@dataclass
class RadialField:
    """Values of a radially symmetric function on a grid, one per node."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise ValueError("field length must match the grid")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.values = values

    def copy(self) -> "RadialField":
        return RadialField(self.grid, self.values.copy())


def build_grid(radius: float, node_count: int, min_spacing: float) -> RadialGrid:
    """Geometrically graded mesh with first interval ~ min_spacing.

    min_spacing equal to the uniform spacing yields a near-uniform mesh.
    """
    if radius <= 0.0:
        raise GridError("radius must be positive")
    if node_count < 64:
        raise GridError("node_count must be at least 64")
    cells = node_count - 1
    uniform_h = radius / cells
    if min_spacing <= 0.0:
        raise GridError("min_spacing must be positive")
    if min_spacing > uniform_h * (1.0 + 1e-12):
        raise GridError("min_spacing exceeds the uniform spacing")
    if min_spacing >= uniform_h * (1.0 - 1e-9):
        nodes = np.linspace(0.0, radius, node_count)
        nodes[-1] = radius
        return RadialGrid(nodes=nodes, radius=radius, ratio=1.0)

    def total(g: float) -> float:
        try:
            growth = g ** cells
        except OverflowError:
            return math.inf
        return min_spacing * (growth - 1.0) / (g - 1.0)

    lo, hi = 1.0 + 1e-15, 2.0
    while total(hi) < radius:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < radius:
            lo = mid
        else:
            hi = mid
    g = 0.5 * (lo + hi)
    spacings = min_spacing * g ** np.arange(cells)
    nodes = np.concatenate(([0.0], np.cumsum(spacings)))
    nodes *= radius / nodes[-1]
    nodes[0] = 0.0
    nodes[-1] = radius
    return RadialGrid(nodes=nodes, radius=radius, ratio=g)


def laplacian(f: RadialField, dim: int) -> RadialField:
    """Radial Laplacian f'' + (dim-1) f'/rho with Neumann walls."""
    geom = f.grid.geometry(dim)
    return RadialField(f.grid, geom.laplacian_apply(f.values))


def mean_power_integral(f: RadialField, exponent: float, dim: int) -> float:
    """Volume mean of f^exponent over the ball (shell-volume quadrature)."""
    values = f.values
    if float(exponent) != int(exponent) and np.any(values < 0.0):
        raise DomainError("negative values with a fractional exponent")
    geom = f.grid.geometry(dim)
    with np.errstate(divide="ignore"):
        powered = values ** exponent
    if not np.all(np.isfinite(powered)):
        raise DomainError("power of field is not finite")
    return float(np.dot(geom.volumes, powered) / np.sum(geom.volumes))


def heat_semigroup(f: RadialField, t: float, dim: int, dt: float | None = None) -> RadialField:
    """Diffuse f for time t under Neumann conditions by implicit stepping."""
    if t < 0.0:
        raise ValueError("diffusion time must be non-negative")
    if t == 0.0:
        return f.copy()
    geom = f.grid.geometry(dim)
    if dt is None:
        dt = f.grid.radius ** 2 / 4096.0
    nsub = max(1, int(math.ceil(t / dt - 1e-12)))
    dt_eff = t / nsub
    values = f.values.copy()
    for _ in range(nsub):
        values = geom.solve_shifted(1.0, dt_eff, values)
    return RadialField(f.grid, values)


def sup_norm(f: RadialField) -> float:
    """Maximum absolute value over the grid."""
    return float(np.max(np.abs(f.values)))


def gradient(f: RadialField) -> RadialField:
    """Second-order radial derivative, one-sided at both ends."""
    rho = f.grid.nodes
    v = f.values
    out = np.empty_like(v)
    hm = rho[1:-1] - rho[:-2]
    hp = rho[2:] - rho[1:-1]
    denom = hm * hp * (hm + hp)
    out[1:-1] = (hm ** 2 * v[2:] + (hp ** 2 - hm ** 2) * v[1:-1]
                 - hp ** 2 * v[:-2]) / denom
    h0, h1 = rho[1] - rho[0], rho[2] - rho[1]
    out[0] = (-(2 * h0 + h1) / (h0 * (h0 + h1)) * v[0]
              + (h0 + h1) / (h0 * h1) * v[1]
              - h0 / (h1 * (h0 + h1)) * v[2])
    hN, hN1 = rho[-1] - rho[-2], rho[-2] - rho[-3]
    out[-1] = ((2 * hN + hN1) / (hN * (hN + hN1)) * v[-1]
               - (hN + hN1) / (hN * hN1) * v[-2]
               + hN / (hN1 * (hN + hN1)) * v[-3])
    return RadialField(f.grid, out)


def volume_mean(values: np.ndarray, grid: RadialGrid, dim: int) -> float:
    """Volume mean of arbitrary nodal values over the ball."""
    geom = grid.geometry(dim)
    return float(np.dot(geom.volumes, values) / np.sum(geom.volumes))


def ball_volume(radius: float, dim: int) -> float:
    """Volume of the dim-ball of the given radius."""
    return math.pi ** (dim / 2.0) * radius ** dim / math.gamma(dim / 2.0 + 1.0)


def field_to_csv(f: RadialField, path) -> None:
    """Serialize to two-column CSV (radius, value)."""
    with open(path, "w") as fh:
        fh.write("radius,value\n")
        for r, v in zip(f.grid.nodes, f.values):
            fh.write(f"{r:.17g},{v:.17g}\n")


def field_from_csv(path, grid: RadialGrid | None = None) -> RadialField:
    """Read a two-column CSV; attach to `grid` or rebuild one from the file."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    nodes, values = data[:, 0], data[:, 1]
    if grid is None:
        grid = RadialGrid(nodes=nodes, radius=float(nodes[-1]))
    elif not np.allclose(nodes, grid.nodes, rtol=0.0, atol=1e-15):
        raise ValueError("CSV nodes do not match the target grid")
    return RadialField(grid, values)
