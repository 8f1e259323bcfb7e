"""Masked ball grids, vector fields, energy, and equivariant operations."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .coxeter import OrbitInfo, ReflectionGroup, cone_distances, map_to_chamber
from .errors import GridTooLarge

DEFAULT_NODE_CAP = 4_000_000


@dataclass
class BallGrid:
    """Uniform lattice masked to the ball |x| <= R with staircase Neumann data."""

    dim: int
    R: float
    h: float
    offsets: np.ndarray          # (N, n) integer lattice coordinates
    coords: np.ndarray           # (N, n) physical coordinates, h * offsets
    neighbors: np.ndarray        # (N, 2n); col 2d = +e_d, col 2d+1 = -e_d, -1 missing
    idmap: np.ndarray = field(repr=False, default=None)   # flat dense lookup, -1 absent
    box_shape: np.ndarray = field(repr=False, default=None)
    box_lo: np.ndarray = field(repr=False, default=None)

    _clamped: np.ndarray = field(repr=False, default=None)

    @property
    def num_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def neighbors_clamped(self) -> np.ndarray:
        """Neighbor table with missing entries pointing back at the node."""
        if self._clamped is None:
            own = np.arange(self.num_nodes, dtype=np.int64)[:, None]
            self._clamped = np.ascontiguousarray(
                np.where(self.neighbors < 0, own, self.neighbors))
        return self._clamped

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def is_boundary(self) -> np.ndarray:
        return (self.neighbors < 0).any(axis=1)

    @property
    def boundary_normals(self) -> np.ndarray:
        """Outward staircase normals; zero rows for interior nodes."""
        out = np.zeros_like(self.coords)
        for d in range(self.dim):
            out[:, d] += (self.neighbors[:, 2 * d] < 0).astype(float)
            out[:, d] -= (self.neighbors[:, 2 * d + 1] < 0).astype(float)
        nrm = np.linalg.norm(out, axis=1)
        nz = nrm > 0
        out[nz] /= nrm[nz, None]
        return out

    def interior_mask(self) -> np.ndarray:
        return ~self.is_boundary


@dataclass
class VectorField:
    grid: BallGrid
    values: np.ndarray           # (N, n)

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.values.copy())

    def max_norm(self) -> float:
        return float(np.linalg.norm(self.values, axis=1).max())


@dataclass
class ScalarField:
    grid: BallGrid
    values: np.ndarray           # (N,)


def build_grid(n: int, R: float, h: float, node_cap: int = DEFAULT_NODE_CAP) -> BallGrid:
    """Lattice points h*(i_1..i_n) with |x| <= R, plus the neighbor table."""
    if n not in (2, 3):
        raise ValueError("grids support n in {2, 3}")
    # production runs want h <= R/8; anything coarser than R/2 is not a ball
    if not 0 < h <= R / 2:
        raise ValueError(f"need 0 < h <= R/2, got h={h}, R={R}")
    k = int(np.floor(R / h + 1e-12))
    est = (2 * k + 1) ** n
    if est > 8 * node_cap:
        raise GridTooLarge(f"bounding box has {est} sites, cap is {node_cap}")

    axes = [np.arange(-k, k + 1)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    offs = np.stack([m.ravel() for m in mesh], axis=1).astype(np.int64)
    r2 = (offs.astype(float) ** 2).sum(axis=1) * h * h
    inside = r2 <= R * R * (1 + 1e-12)
    offs = offs[inside]
    if offs.shape[0] > node_cap:
        raise GridTooLarge(f"{offs.shape[0]} nodes exceed cap {node_cap}")

    box_shape = np.full(n, 2 * k + 1, dtype=np.int64)
    box_lo = np.full(n, -k, dtype=np.int64)
    strides = np.ones(n, dtype=np.int64)
    for d in range(n - 2, -1, -1):
        strides[d] = strides[d + 1] * box_shape[d + 1]
    idmap = np.full(int(np.prod(box_shape)), -1, dtype=np.int64)
    flat = ((offs - box_lo) * strides).sum(axis=1)
    idmap[flat] = np.arange(offs.shape[0])

    neighbors = np.full((offs.shape[0], 2 * n), -1, dtype=np.int64)
    for d in range(n):
        for sign, col in ((1, 2 * d), (-1, 2 * d + 1)):
            shifted = offs.copy()
            shifted[:, d] += sign
            valid = ((shifted >= box_lo) & (shifted < box_lo + box_shape)).all(axis=1)
            flat_s = ((shifted[valid] - box_lo) * strides).sum(axis=1)
            neighbors[valid, col] = idmap[flat_s]

    return BallGrid(dim=n, R=R, h=h, offsets=offs, coords=offs * h,
                    neighbors=neighbors, idmap=idmap,
                    box_shape=box_shape, box_lo=box_lo)


def laplacian(u: VectorField) -> VectorField:
    """Masked 2n+1-point stencil with homogeneous Neumann mirroring.

    Missing neighbors mirror to the center value, so the result is exactly the
    graph Laplacian of the masked lattice (and the negative discrete energy
    gradient, up to the cell volume factor).
    """
    g = u.grid
    vals = K.laplacian(u.values, g.neighbors_clamped, 1.0 / (g.h * g.h))
    return VectorField(g, vals)


def laplacian_scalar(s: ScalarField) -> ScalarField:
    g = s.grid
    vals = K.laplacian(s.values[:, None], g.neighbors_clamped, 1.0 / (g.h * g.h))
    return ScalarField(g, vals[:, 0])


def energy(u: VectorField, spec) -> float:
    """J(u) over the ball: forward-difference Dirichlet part plus nodal W."""
    g = u.grid
    raw = K.energy_sum(u.values, g.neighbors_clamped, spec.exps, spec.coeffs,
                       1.0 / (g.h * g.h))
    return float(raw) * g.cell_volume


def dirichlet_pairing(a: np.ndarray, b: np.ndarray, grid: BallGrid) -> float:
    """sum over edges of <grad a, grad b> * h^n for scalar node arrays."""
    acc = 0.0
    inv_h2 = 1.0 / (grid.h * grid.h)
    nbc = grid.neighbors_clamped
    for d in range(grid.dim):
        fwd = nbc[:, 2 * d]
        acc += float(((a[fwd] - a) * (b[fwd] - b)).sum()) * inv_h2
    return acc * grid.cell_volume


def interp_at(u: VectorField, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of node values at arbitrary in-ball points."""
    g = u.grid
    return K.interp(u.values, np.ascontiguousarray(points, dtype=float),
                    g.idmap, g.box_shape, g.box_lo.astype(float), g.h)


def group_pullbacks(u: VectorField, group: ReflectionGroup) -> np.ndarray:
    """Stack of fields g^{-1} u(g x) for every group element; shape (|G|, N, n)."""
    g = u.grid
    out = np.empty((group.order, g.num_nodes, g.dim))
    for k, mat in enumerate(group.elements):
        pts = u.grid.coords @ mat.T
        vals = interp_at(u, pts)
        out[k] = vals @ mat            # mat orthogonal: g^{-1} = g^T acts by right-mult
    return out


def symmetrize(u: VectorField, group: ReflectionGroup) -> VectorField:
    """Group-average (1/|G|) sum_g g^{-1} u(g x) with multilinear interpolation."""
    if group.order == 1:
        return u.copy()
    return VectorField(u.grid, group_pullbacks(u, group).mean(axis=0))


def equivariance_residual(u: VectorField, group: ReflectionGroup,
                          interior_only: bool = True) -> float:
    """max over g and sampled nodes of |u(g x) - g u(x)|."""
    if group.order == 1:
        return 0.0
    g = u.grid
    mask = np.linalg.norm(g.coords, axis=1) <= g.R - 2 * g.h * np.sqrt(g.dim) \
        if interior_only else np.ones(g.num_nodes, dtype=bool)
    worst = 0.0
    for mat in group.elements[1:]:
        pts = g.coords[mask] @ mat.T
        vals = interp_at(u, pts)                 # u(g x)
        target = u.values[mask] @ mat.T          # g u(x)
        worst = max(worst, float(np.linalg.norm(vals - target, axis=1).max()))
    return worst


def seed_affine(grid: BallGrid, orbit: OrbitInfo) -> VectorField:
    """Equivariant ramp seed: min(dist_D, 1) * a1 on D-bar, pulled back elsewhere.

    The deepest-representative choice is consistent across stabilizer ties, so
    the node values are exactly equivariant (no interpolation involved).
    """
    group = orbit.group
    d_normals = orbit.region_D_normals
    a1 = orbit.base_point
    if d_normals.size == 0:
        t = np.ones(grid.num_nodes)
        return VectorField(grid, np.minimum(t, 1.0)[:, None] * a1)

    # depth of every group image of every node in D
    images = np.einsum("gij,nj->gni", group.elements, grid.coords)
    depths = np.einsum("gni,mi->gnm", images, d_normals).min(axis=2)  # (|G|, N)
    best = depths.argmax(axis=0)
    t = np.clip(depths[best, np.arange(grid.num_nodes)], 0.0, 1.0)
    mats = group.elements[best]                   # (N, n, n)
    vals = np.einsum("nji,j->ni", mats, a1) * t[:, None]   # g^T a1 = g^{-1} a1
    return VectorField(grid, vals)


def project_to_ball(u: VectorField, M: float) -> VectorField:
    """Nodewise radial projection onto |v| <= M (nonexpansive, equivariant)."""
    if M <= 0:
        raise ValueError("M must be positive")
    norms = np.linalg.norm(u.values, axis=1)
    scale = np.where(norms > M, M / np.where(norms == 0, 1.0, norms), 1.0)
    return VectorField(u.grid, u.values * scale[:, None])


def resample(u: VectorField, fine: BallGrid) -> VectorField:
    """Interpolate a field onto another grid of the same ball (warm starts)."""
    pts = np.clip(fine.coords, -u.grid.R, u.grid.R)
    return VectorField(fine, interp_at(u, pts))


def chamber_masks(grid: BallGrid, group: ReflectionGroup,
                  tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """(closed F-bar mask, open-F interior mask) over grid nodes."""
    if group.fund_normals.size == 0:
        all_true = np.ones(grid.num_nodes, dtype=bool)
        return all_true, all_true
    dots = grid.coords @ group.fund_normals.T
    return dots.min(axis=1) >= -tol, dots.min(axis=1) > tol


def positivity_min(values: np.ndarray, fbar_mask: np.ndarray,
                   group: ReflectionGroup) -> float:
    """min over F-bar nodes of min_gamma <u(x), eta_gamma>."""
    if group.fund_normals.size == 0 or not fbar_mask.any():
        return 0.0
    dots = values[fbar_mask] @ group.fund_normals.T
    return float(dots.min())


def save_field_csv(u: VectorField, path) -> None:
    """CSV export: x1..xn,u1..un with 17 significant digits, one node per row."""
    g = u.grid
    n = g.dim
    header = ",".join([f"x{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(n)])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(g.num_nodes):
            row = list(g.coords[i]) + list(u.values[i])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_field_csv(path, grid: BallGrid) -> VectorField:
    """Read a field written by save_field_csv onto a matching grid."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = grid.dim
    if data.shape != (grid.num_nodes, 2 * n):
        raise ValueError(f"field file shape {data.shape} does not match grid "
                         f"({grid.num_nodes} nodes, dim {n})")
    if np.max(np.abs(data[:, :n] - grid.coords)) > 1e-9:
        raise ValueError("field file coordinates do not match the grid")
    return VectorField(grid, np.ascontiguousarray(data[:, n:]))
