"""Finite reflection groups: closure generation, fundamental sectors, orbits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClosureOverflow, NotInClosure

DEDUP_TOL = 1e-9
UNIT_TOL = 1e-12
ORTHO_TOL = 1e-10
DEFAULT_CAP = 1024

# Generic direction used to orient mirror normals and to seed interior samples.
# Irrational-ish coordinates keep it off every mirror of the target groups.
_GENERIC = np.array([1.0, 0.6180339887498949, 0.4142135623730951, 0.3027756377319946])


@dataclass(frozen=True)
class Reflection:
    """Orthogonal reflection across the hyperplane with the given unit normal."""

    normal: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(eta) - 1.0) > 1e-8:
            raise ValueError("reflection normal must be a unit vector")
        object.__setattr__(self, "normal", eta / np.linalg.norm(eta))

    @property
    def matrix(self) -> np.ndarray:
        eta = self.normal
        return np.eye(eta.size) - 2.0 * np.outer(eta, eta)

    @staticmethod
    def from_vector(v) -> "Reflection":
        v = np.asarray(v, dtype=float)
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            raise ValueError("zero vector has no reflection")
        return Reflection(v / nrm)


def reflect(x: np.ndarray, r: Reflection) -> np.ndarray:
    """Apply the reflection: x - 2<x, eta> eta."""
    x = np.asarray(x, dtype=float)
    return x - 2.0 * (x @ r.normal) * r.normal


@dataclass
class ReflectionGroup:
    """Closure of a set of reflections, with oriented mirror normals.

    ``fund_normals`` are oriented so the open chamber
    F = {x : <x, eta> > 0 for all eta} contains ``seed_dir``.
    """

    dim: int
    elements: np.ndarray            # (|G|, n, n), elements[0] == I
    generators: list[Reflection]
    reflections: np.ndarray         # (|Gamma|, n, n)
    fund_normals: np.ndarray        # (|Gamma|, n)
    order: int
    seed_dir: np.ndarray = field(repr=False, default=None)

    def chamber_dots(self, x) -> np.ndarray:
        """Half-space inner products <x, eta> for all oriented mirror normals."""
        return np.asarray(x, dtype=float) @ self.fund_normals.T

    def in_closed_chamber(self, x, tol: float = DEDUP_TOL) -> bool:
        return bool(np.min(self.chamber_dots(x)) >= -tol)


@dataclass
class OrbitInfo:
    """Orbit/stabilizer data of a base point, plus the invariant cone D."""

    base_point: np.ndarray
    stabilizer: list[np.ndarray]
    orbit: np.ndarray               # (N, n)
    count: int
    region_D_normals: np.ndarray    # (m, n); D = {x : <x, eta> > 0 for all eta}
    group: ReflectionGroup = field(repr=False, default=None)


def _generic_direction(dim: int, reflections: np.ndarray) -> np.ndarray:
    """Direction with nonzero inner product against every mirror normal."""
    base = _GENERIC[:dim].copy()
    normals = [_reflection_normal(g) for g in reflections]
    for k in range(64):
        cand = base + 0.01 * k * _GENERIC[1 : dim + 1]
        cand = cand / np.linalg.norm(cand)
        if all(abs(cand @ eta) > 1e-6 for eta in normals):
            return cand
    raise RuntimeError("could not find a generic seed direction")


def _reflection_normal(g: np.ndarray) -> np.ndarray:
    # For a reflection, (I - g)/2 equals the rank-one projector eta eta^T.
    proj = 0.5 * (np.eye(g.shape[0]) - g)
    col = proj[:, int(np.argmax(np.linalg.norm(proj, axis=0)))]
    return col / np.linalg.norm(col)


def _is_reflection(g: np.ndarray, tol: float = DEDUP_TOL) -> bool:
    n = g.shape[0]
    if np.max(np.abs(g @ g - np.eye(n))) > tol:
        return False
    return abs(np.trace(g) - (n - 2)) <= 1e-7


def generate_group(generators: list[Reflection], dim: int | None = None,
                   cap: int = DEFAULT_CAP) -> ReflectionGroup:
    """Close a generator set under products, identify mirrors, orient normals.

    Raises ClosureOverflow if the closure exceeds ``cap`` elements.
    """
    if dim is None:
        if not generators:
            raise ValueError("dim required for an empty generator set")
        dim = generators[0].normal.size
    for r in generators:
        if r.normal.size != dim:
            raise ValueError("generator dimension mismatch")

    eye = np.eye(dim)
    elements = [eye]
    gen_mats = [r.matrix for r in generators]
    for m in gen_mats:
        if np.max(np.abs(m.T @ m - eye)) > ORTHO_TOL:
            raise ValueError("generator is not orthogonal")

    def _find(mat) -> int:
        for i, e in enumerate(elements):
            if np.max(np.abs(e - mat)) <= DEDUP_TOL:
                return i
        return -1

    frontier = [eye]
    while frontier:
        new_frontier = []
        for a in frontier:
            for m in gen_mats:
                prod = m @ a
                if _find(prod) < 0:
                    elements.append(prod)
                    new_frontier.append(prod)
                    if len(elements) > cap:
                        raise ClosureOverflow(
                            f"group closure exceeded cap={cap}; "
                            "generators look ill-conditioned or non-terminating")
        frontier = new_frontier

    elems = np.array(elements)
    refl = np.array([g for g in elements if _is_reflection(g)])
    if refl.size == 0:
        refl = refl.reshape(0, dim, dim)

    seed = _generic_direction(dim, refl) if len(refl) else _GENERIC[:dim] / np.linalg.norm(_GENERIC[:dim])
    normals = []
    for g in refl:
        eta = _reflection_normal(g)
        if seed @ eta < 0:
            eta = -eta
        normals.append(eta)
    fund_normals = np.array(normals) if normals else np.zeros((0, dim))

    return ReflectionGroup(dim=dim, elements=elems, generators=list(generators),
                           reflections=refl, fund_normals=fund_normals,
                           order=len(elements), seed_dir=seed)


def map_to_chamber(group: ReflectionGroup, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Index and image of the group element carrying x deepest into F-bar."""
    x = np.asarray(x, dtype=float)
    if group.fund_normals.size == 0:
        return 0, x
    images = np.einsum("gij,j->gi", group.elements, x)
    depths = np.min(images @ group.fund_normals.T, axis=1)
    idx = int(np.argmax(depths))
    return idx, images[idx]


def orbit_and_stabilizer(group: ReflectionGroup, a1) -> OrbitInfo:
    """Orbit, stabilizer and the cone D spanned by the stabilizer images of F.

    Raises NotInClosure unless a1 lies in the closed chamber F-bar.
    """
    a1 = np.asarray(a1, dtype=float)
    if np.linalg.norm(a1) == 0.0:
        raise ValueError("base point must be nonzero")
    scale = np.linalg.norm(a1)
    if group.fund_normals.size and np.min(group.chamber_dots(a1)) < -DEDUP_TOL * scale:
        raise NotInClosure("base point is not in the closed fundamental region")

    images = np.einsum("gij,j->gi", group.elements, a1)
    stab = [g for g, img in zip(group.elements, images)
            if np.linalg.norm(img - a1) <= DEDUP_TOL * max(1.0, scale)]

    orbit = []
    for img in images:
        if all(np.linalg.norm(img - p) > DEDUP_TOL * max(1.0, scale) for p in orbit):
            orbit.append(img)
    orbit = np.array(orbit)
    count = len(orbit)
    if count * len(stab) != group.order:
        raise AssertionError("orbit-stabilizer identity violated; dedup tolerance too loose")

    # Interior samples of D: stabilizer images of chamber-interior points.
    # A mirror meets Int(D) exactly when some sample falls strictly on its
    # negative side (F itself is always on the positive side).
    rng = np.random.default_rng(0x5EC70)
    interior = [group.seed_dir]
    for _ in range(32):
        v = rng.standard_normal(group.dim)
        _, y = map_to_chamber(group, v / np.linalg.norm(v))
        if group.fund_normals.size and np.min(group.chamber_dots(y)) > 1e-3:
            interior.append(y / np.linalg.norm(y))
    samples = np.array([s @ g.T for g in stab for s in interior])

    keep = []
    for eta in group.fund_normals:
        if np.min(samples @ eta) >= -DEDUP_TOL:
            keep.append(eta)
    region = np.array(keep) if keep else np.zeros((0, group.dim))

    return OrbitInfo(base_point=a1, stabilizer=stab, orbit=orbit, count=count,
                     region_D_normals=region, group=group)


def region_geometry(x, info: OrbitInfo | ReflectionGroup) -> tuple[bool, bool, float]:
    """Open-membership flags for F and D plus the distance to the cone boundary.

    D is an intersection of half-spaces through the origin, so for x in D the
    distance to its boundary is the smallest inner product with the normals.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(info, ReflectionGroup):
        group, d_normals = info, info.fund_normals
    else:
        group, d_normals = info.group, info.region_D_normals

    if group.fund_normals.size == 0:
        return True, True, float("inf")
    in_f = bool(np.min(group.chamber_dots(x)) > 0.0)
    dots = x @ d_normals.T if d_normals.size else np.array([np.inf])
    in_d = bool(np.min(dots) > 0.0)
    dist = float(np.min(dots)) if in_d else 0.0
    return in_f, in_d, dist


def cone_distances(X: np.ndarray, info: OrbitInfo) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (in_D, dist_D) over rows of X; dist is 0 outside D."""
    d_normals = info.region_D_normals
    if d_normals.size == 0:
        n = X.shape[0]
        return np.ones(n, dtype=bool), np.full(n, np.inf)
    dots = X @ d_normals.T
    mind = dots.min(axis=1)
    in_d = mind > 0.0
    return in_d, np.where(in_d, mind, 0.0)
