"""Polynomial potentials, the distance-like monitor function, hypothesis checks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .coxeter import OrbitInfo
from .errors import HypothesisScanFailed, NonConvexQ

# W(u, v) = |z^3 - 1|^2 = (u^2 + v^2)^3 - 2 Re z^3 + 1 for z = u + iv
TRIANGLE_EXPS = np.array([[6, 0], [4, 2], [2, 4], [0, 6], [3, 0], [1, 2], [0, 0]],
                         dtype=np.int64)
TRIANGLE_COEFFS = np.array([1.0, 3.0, 3.0, 1.0, -2.0, 6.0, 1.0])


@dataclass
class PotentialSpec:
    """Polynomial potential with certified convexity / invariant-ball constants."""

    dim: int
    minima: np.ndarray           # (N, n)
    exps: np.ndarray             # (K, n) exponent table
    coeffs: np.ndarray           # (K,)
    c: float                     # v' Hess v >= 2 c^2 |v|^2 on the q_bar shells
    q_bar: float                 # radius of the certified convexity neighborhood
    M: float                     # radius of the flow-invariant ball

    def value(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return K.poly_eval(U, self.exps, self.coeffs)

    def grad(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return K.poly_grad(U, self.exps, self.coeffs)

    def hess(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return K.poly_hess(U, self.exps, self.coeffs)


@dataclass
class QSpec:
    """Monitor function Q(u) = |u - a1| + H(u - a1) with Q_u(a1) := 0."""

    base: np.ndarray
    q_max: float
    h_exps: np.ndarray | None = None
    h_coeffs: np.ndarray | None = None

    @property
    def has_h(self) -> bool:
        return self.h_exps is not None and len(self.h_exps) > 0

    def eval(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        w = U - self.base
        q = np.linalg.norm(w, axis=1)
        if self.has_h:
            q = q + K.poly_eval(w, self.h_exps, self.h_coeffs)
        return q

    def grad(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        w = U - self.base
        r = np.linalg.norm(w, axis=1)
        safe = np.where(r == 0.0, 1.0, r)
        g = w / safe[:, None]
        g[r == 0.0] = 0.0
        if self.has_h:
            g = g + K.poly_grad(w, self.h_exps, self.h_coeffs)
        return g


@dataclass
class HypothesisReport:
    h1_min_eig: float
    h1_c: float
    h1_pass: bool
    h2_min: float
    h2_pass: bool
    h3_minima_in_chamber: int
    h3_pass: bool
    h4_min: float
    h4_violations: np.ndarray    # sample points with <Q_u, W_u> < -tol
    h4_pass: bool
    h4_quadratic_min: float      # min of <Q_u, W_u> - c^2 Q inside the q_bar ball

    @property
    def admissible(self) -> bool:
        return self.h1_pass and self.h2_pass and self.h3_pass and self.h4_pass


def _unit_directions(n: int, count: int) -> np.ndarray:
    if n == 2:
        th = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    # Fibonacci sphere for n = 3
    i = np.arange(count) + 0.5
    phi = np.arccos(1 - 2 * i / count)
    theta = np.pi * (1 + 5 ** 0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi),
                     np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)


def _hessian_shell_scan(spec_like, a1, q_grid, ndirs=128):
    """Cumulative-min smallest Hessian eigenvalue over shells around a1."""
    dirs = _unit_directions(a1.size, ndirs)
    mins = np.empty(q_grid.size)
    for i, q in enumerate(q_grid):
        H = K.poly_hess(a1 + q * dirs, spec_like.exps, spec_like.coeffs)
        mins[i] = np.linalg.eigvalsh(H).min()
    return np.minimum.accumulate(mins)


def certify_constants(exps, coeffs, minima, margin: float = 0.9,
                      m_max: float = 4.0) -> tuple[float, float, float]:
    """Scan for (c, q_bar, M): convexity radius with 10% margin, invariant ball."""
    minima = np.atleast_2d(minima)
    a1 = minima[0]
    tmp = PotentialSpec(dim=a1.size, minima=minima, exps=exps, coeffs=coeffs,
                        c=0.0, q_bar=0.0, M=0.0)

    if minima.shape[0] > 1:
        d = np.linalg.norm(minima[:, None] - minima[None, :], axis=-1)
        half_gap = 0.5 * d[~np.eye(len(minima), dtype=bool)].min()
    else:
        half_gap = 1.0
    q_grid = np.linspace(0.01 * half_gap, 0.98 * half_gap, 80)
    cum = _hessian_shell_scan(tmp, a1, q_grid)
    if cum[0] <= 0.0:
        raise HypothesisScanFailed("Hessian not positive on any shell around a1")
    pos = np.nonzero(cum > 0.0)[0]
    q_raw = q_grid[pos[-1]]
    q_bar = margin * q_raw
    lam = _hessian_shell_scan(tmp, a1, np.linspace(0.01 * q_bar, q_bar, 48))[-1]
    if lam <= 0.0:
        raise HypothesisScanFailed("certified radius lost positivity on rescan")
    c = float(np.sqrt(lam / 2.0))

    dirs = _unit_directions(a1.size, 256)
    M = None
    for m in np.arange(0.5, m_max + 1e-9, 0.0125):
        U = m * dirs
        radial = (K.poly_grad(U, exps, coeffs) * U).sum(axis=1)
        if radial.min() >= -1e-9 * (1.0 + np.abs(radial).max()):
            M = float(m)
            break
    if M is None:
        raise HypothesisScanFailed("no invariant sphere radius found in scan range")
    # the invariant ball must contain the minima (the projection fixes them)
    M = max(M, float(np.linalg.norm(minima, axis=1).max()))
    return c, float(q_bar), M


def make_triangle_potential() -> PotentialSpec:
    """Three-well potential |z^3 - 1|^2 with minima at the cube roots of unity."""
    minima = np.array([[1.0, 0.0],
                       [-0.5, np.sqrt(3) / 2],
                       [-0.5, -np.sqrt(3) / 2]])
    c, q_bar, M = certify_constants(TRIANGLE_EXPS, TRIANGLE_COEFFS, minima)
    return PotentialSpec(dim=2, minima=minima, exps=TRIANGLE_EXPS,
                         coeffs=TRIANGLE_COEFFS, c=c, q_bar=q_bar, M=M)


def make_custom_potential(exps, coeffs, minima) -> PotentialSpec:
    """Potential from a polynomial coefficient table; constants are scanned."""
    exps = np.asarray(exps, dtype=np.int64)
    coeffs = np.asarray(coeffs, dtype=float)
    minima = np.atleast_2d(np.asarray(minima, dtype=float))
    vals = K.poly_eval(minima, exps, coeffs)
    if np.max(np.abs(vals)) > 1e-10:
        raise ValueError("declared minima do not have W = 0")
    c, q_bar, M = certify_constants(exps, coeffs, minima)
    return PotentialSpec(dim=minima.shape[1], minima=minima, exps=exps,
                         coeffs=coeffs, c=c, q_bar=q_bar, M=M)


def eval_potential(spec: PotentialSpec, u, want_hessian: bool = False):
    """(W, W_u[, Hessian]) at a single point."""
    u = np.asarray(u, dtype=float)
    w = float(spec.value(u[None])[0])
    g = spec.grad(u[None])[0]
    if want_hessian:
        return w, g, spec.hess(u[None])[0]
    return w, g


def eval_q(q: QSpec, u) -> tuple[float, np.ndarray]:
    """(Q, Q_u) at a single point; the gradient at the base point is zero."""
    u = np.asarray(u, dtype=float)
    return float(q.eval(u[None])[0]), q.grad(u[None])[0]


def make_q_spec(a1, M: float, h_exps=None, h_coeffs=None,
                convexity_samples: int = 400, rng=None) -> QSpec:
    """Build the monitor spec; sample-checks convexity when H is supplied."""
    a1 = np.asarray(a1, dtype=float)
    if h_exps is not None and len(h_exps):
        h_exps = np.asarray(h_exps, dtype=np.int64)
        h_coeffs = np.asarray(h_coeffs, dtype=float)
        h0 = K.poly_eval(np.zeros((1, a1.size)), h_exps, h_coeffs)[0]
        g0 = K.poly_grad(np.zeros((1, a1.size)), h_exps, h_coeffs)[0]
        if abs(h0) > 1e-12 or np.max(np.abs(g0)) > 1e-12:
            raise ValueError("H must satisfy H(0) = 0 and H_u(0) = 0")
    else:
        h_exps = h_coeffs = None

    spec = QSpec(base=a1, q_max=0.0, h_exps=h_exps, h_coeffs=h_coeffs)
    if spec.has_h:
        rng = rng or np.random.default_rng(0xACF)
        U = a1 + (M + np.linalg.norm(a1)) * rng.uniform(-1, 1, (convexity_samples, 2, a1.size))
        qa, qb = spec.eval(U[:, 0]), spec.eval(U[:, 1])
        qm = spec.eval(0.5 * (U[:, 0] + U[:, 1]))
        if np.max(qm - 0.5 * (qa + qb)) > 1e-12 * (1 + np.abs(qa).max()):
            raise NonConvexQ("midpoint convexity sample test failed")
        dirs = _unit_directions(a1.size, 512)
        q_max = float(max(spec.eval(r * M * dirs).max() for r in np.linspace(0, 1, 33)))
    else:
        q_max = M + float(np.linalg.norm(a1))   # farthest point of the M-ball from a1
    spec.q_max = q_max
    return spec


def check_hypotheses(spec: PotentialSpec, q: QSpec, orbit: OrbitInfo,
                     samples: int = 2000, rng=None) -> HypothesisReport:
    """Numerical verification of the four structural hypotheses on samples."""
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = rng or np.random.default_rng(1213)
    a1 = orbit.base_point
    n = spec.dim

    q_grid = np.linspace(0.02 * spec.q_bar, spec.q_bar, 24)
    cum = _hessian_shell_scan(spec, a1, q_grid)
    h1_min = float(cum[-1])
    h1_c = float(np.sqrt(max(h1_min, 0.0) / 2.0))

    dirs = _unit_directions(n, 512)
    radial = (spec.grad(spec.M * dirs) * (spec.M * dirs)).sum(axis=1)
    h2_min = float(radial.min())
    h2_scale = 1.0 + float(np.abs(radial).max())

    group = orbit.group
    in_chamber = 0
    for m in spec.minima:
        if group.fund_normals.size == 0 or group.chamber_dots(m).min() >= -1e-9:
            in_chamber += 1

    # H4 on samples of D: random ball points mapped into the cone
    pts = rng.standard_normal((samples * 4, n))
    pts *= (spec.M * rng.uniform(0, 1, samples * 4) ** (1 / n) /
            np.linalg.norm(pts, axis=1))[:, None]
    d_normals = orbit.region_D_normals
    if d_normals.size:
        keep = (pts @ d_normals.T).min(axis=1) > 0
        pts = pts[keep]
    pts = pts[np.linalg.norm(pts - a1, axis=1) > 1e-6][:samples]
    mono = (q.grad(pts) * spec.grad(pts)).sum(axis=1)
    h4_min = float(mono.min()) if mono.size else 0.0
    viol = pts[mono < -1e-10]

    shell = rng.standard_normal((samples, n))
    shell *= (spec.q_bar * rng.uniform(0, 1, samples) ** (1 / n) /
              np.linalg.norm(shell, axis=1))[:, None]
    near = a1 + shell
    if d_normals.size:
        near = near[(near @ d_normals.T).min(axis=1) > 0]
    quad = ((q.grad(near) * spec.grad(near)).sum(axis=1)
            - spec.c ** 2 * q.eval(near))

    return HypothesisReport(
        h1_min_eig=h1_min, h1_c=h1_c, h1_pass=h1_min > 0.0,
        h2_min=h2_min, h2_pass=h2_min >= -1e-9 * h2_scale,
        h3_minima_in_chamber=in_chamber, h3_pass=in_chamber == 1,
        h4_min=h4_min, h4_violations=viol, h4_pass=h4_min >= -1e-10,
        h4_quadratic_min=float(quad.min()) if quad.size else 0.0)
