"""Diagnostics on equilibrium fields: weak-form inequalities, measure and
oscillation estimates, barrier ordering, decay and energy fits."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dfield

import numpy as np

from . import _kernels as K
from .comparison import RadialProfile
from .coxeter import OrbitInfo, ReflectionGroup, cone_distances
from .errors import (BallOutsideD, InsufficientNodes, NoConvergence,
                     SeedBallRejected)
from .field import (BallGrid, VectorField, build_grid, chamber_masks, energy,
                    seed_affine)
from .flow import FlowConfig, FlowResult, run_to_equilibrium
from .potential import PotentialSpec, QSpec


@dataclass
class DiagnosticsReport:
    kato_min: float = np.nan
    subharmonic_min: float = np.nan
    positivity_min: float = np.nan
    strong_positivity_margin: float = np.nan
    measure_fraction: float = np.nan
    degiorgi_sup: float = np.nan
    degiorgi_levels: list = dfield(default_factory=list)
    decay_K: float = np.nan
    decay_k: float = np.nan
    decay_R2: float = np.nan
    energy_slope: float = np.nan
    eps0: float = np.nan
    comparison_violations: int = -1
    comparison_d0: float = np.nan
    comparison_coverage: float = np.nan
    passes: dict = dfield(default_factory=dict)
    details: dict = dfield(default_factory=dict)


# ----------------------------------------------------------------------------
# test bumps
# ----------------------------------------------------------------------------

def _bump_values(grid: BallGrid, center: np.ndarray, width: float) -> np.ndarray:
    """Smooth tensor-product bump (1 - s^2)^2, normalized to max 1 at nodes."""
    s = (grid.coords - center) / width
    prof = np.clip(1.0 - s * s, 0.0, None) ** 2
    vals = prof.prod(axis=1)
    m = vals.max()
    return vals / m if m > 0 else vals


def _random_bump(grid: BallGrid, rng, mask: np.ndarray | None = None,
                 margin: float = 0.0) -> np.ndarray:
    """Bump with random center/width whose support stays in the masked set."""
    h = grid.h
    w_lo = 4 * h
    w_hi = max(grid.R / 4, 1.25 * w_lo)
    for _ in range(200):
        width = rng.uniform(w_lo, w_hi)
        lim = grid.R - width * np.sqrt(grid.dim) - 2 * h - margin
        if lim <= 0:
            continue
        center = rng.uniform(-lim, lim, grid.dim)
        if np.linalg.norm(center) > lim:
            continue
        vals = _bump_values(grid, center, width)
        if mask is not None:
            vals = vals * mask
        if (vals > 0).sum() >= 5:
            m = vals.max()
            return vals / m
    raise RuntimeError("could not draw an admissible bump")


# ----------------------------------------------------------------------------
# Kato and subharmonicity
# ----------------------------------------------------------------------------

def kato_pairing(u: VectorField, q: QSpec, psi: np.ndarray) -> tuple[float, float]:
    """Distributional pairing <Q(u), lap psi> - <<lap u, Q_u(u)>, psi>.

    Returns (pairing, scale) where scale is the magnitude of the two terms;
    the Laplacian lands on the test bump, never on the kinked monitor.
    """
    g = u.grid
    qvals = q.eval(u.values)
    lap_psi = K.laplacian(psi[:, None], g.neighbors_clamped, 1.0 / (g.h * g.h))[:, 0]
    lap_u = K.laplacian(u.values, g.neighbors_clamped, 1.0 / (g.h * g.h))
    inner = (lap_u * q.grad(u.values)).sum(axis=1)
    t1 = qvals * lap_psi
    t2 = inner * psi
    vol = g.cell_volume
    pairing = float((t1 - t2).sum()) * vol
    scale = max(1.0, float(np.abs(t1).sum()) * vol, float(np.abs(t2).sum()) * vol)
    return pairing, scale


def kato_strong_pairing(u: VectorField, q: QSpec, psi: np.ndarray) -> float:
    """Same pairing with the Laplacian applied to Q(u) directly."""
    g = u.grid
    qvals = q.eval(u.values)
    lap_q = K.laplacian(qvals[:, None], g.neighbors_clamped, 1.0 / (g.h * g.h))[:, 0]
    lap_u = K.laplacian(u.values, g.neighbors_clamped, 1.0 / (g.h * g.h))
    inner = (lap_u * q.grad(u.values)).sum(axis=1)
    return float(((lap_q - inner) * psi).sum()) * u.grid.cell_volume


def kato_check(u: VectorField, q: QSpec, trials: int = 50,
               seed: int = 0) -> tuple[float, dict]:
    """Min over random interior bumps of the weak Kato pairing.

    PASS means every pairing clears -10 h max|psi| scale.
    """
    if trials < 20:
        raise ValueError("need at least 20 trials")
    g = u.grid
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBA1]))
    pairings, margins = [], []
    for _ in range(trials):
        psi = _random_bump(g, rng)
        p, scale = kato_pairing(u, q, psi)
        pairings.append(p)
        margins.append(p + 10 * g.h * scale)
    pairings = np.array(pairings)
    details = {"pass": bool(np.min(margins) >= 0.0),
               "worst_margin": float(np.min(margins)),
               "pairings": pairings}
    return float(pairings.min()), details


def subharmonic_pairing(qvals: np.ndarray, phi: np.ndarray,
                        grid: BallGrid) -> tuple[float, float]:
    """-< grad Q(u), grad phi > over edges, with its absolute-value scale."""
    acc = 0.0
    mag = 0.0
    inv_h2 = 1.0 / (grid.h * grid.h)
    nbc = grid.neighbors_clamped
    for d in range(grid.dim):
        fwd = nbc[:, 2 * d]
        prod = (qvals[fwd] - qvals) * (phi[fwd] - phi) * inv_h2
        acc += float(prod.sum())
        mag += float(np.abs(prod).sum())
    return -acc * grid.cell_volume, max(1.0, mag * grid.cell_volume)


def subharmonic_check(u: VectorField, q: QSpec, orbit: OrbitInfo,
                      trials: int = 100, seed: int = 0,
                      equilibrium: bool = True) -> tuple[float, dict]:
    """Min over bumps supported in the cone interior of -int grad Q grad phi."""
    if not equilibrium:
        warnings.warn("field is not flagged as an equilibrium; "
                      "subharmonicity only holds at equilibria", stacklevel=2)
    g = u.grid
    in_d, dist = cone_distances(g.coords, orbit)
    mask = (in_d & (dist > 2 * g.h)).astype(float)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5B8]))
    qvals = q.eval(u.values)
    mins, margins = [], []
    for _ in range(trials):
        phi = _random_bump(g, rng, mask=mask)
        s, scale = subharmonic_pairing(qvals, phi, g)
        mins.append(s)
        margins.append(s + 10 * g.h * scale)
    mins = np.array(mins)
    details = {"pass": bool(np.min(margins) >= 0.0),
               "worst_margin": float(np.min(margins))}
    return float(mins.min()), details


# ----------------------------------------------------------------------------
# measure estimate and oscillation iteration
# ----------------------------------------------------------------------------

@dataclass
class DeGiorgiResult:
    measure_fraction: float
    degiorgi_sup: float
    eps0: float
    levels: list               # sup of Q over B_{r/2^k}, k = 0..k_iter
    k_iter: int
    mu_hat: float


def measure_and_degiorgi(u: VectorField, q: QSpec, center, radius: float,
                         spec: PotentialSpec, orbit: OrbitInfo) -> DeGiorgiResult:
    """Rescaled monitor statistics on a ball, plus the shrinking-ball iteration.

    The iteration depth is the smallest k with
    q_bar/2 + mu^k (Q_max - q_bar/2) < q_bar for the empirical mu.
    """
    g = u.grid
    center = np.asarray(center, dtype=float)
    d = np.linalg.norm(g.coords - center, axis=1)
    ball = d <= radius
    if not ball.any():
        raise BallOutsideD("ball contains no grid nodes")
    in_d, _ = cone_distances(g.coords, orbit)
    if not in_d[ball].all() or np.linalg.norm(center) + radius > g.R + 1e-9:
        raise BallOutsideD("ball is not contained in the cone region of the grid")

    qvals = q.eval(u.values)
    denom = q.q_max - spec.q_bar / 2
    if denom <= 0:
        raise ValueError("Q_max must exceed q_bar/2")
    v = (qvals - spec.q_bar / 2) / denom

    fraction = float((v[ball] <= 0).mean())
    half = d <= radius / 2
    sup_half = float(v[half].max())

    plus = ball & (v >= 0)
    if plus.any():
        eps0 = float(spec.value(u.values[plus]).min())
    else:
        wide = in_d & (qvals >= spec.q_bar / 2)
        eps0 = float(spec.value(u.values[wide]).min()) if wide.any() else np.nan

    target = (spec.q_bar / 2) / denom
    if sup_half <= 0:
        k_iter = 1
    elif sup_half >= 1:
        k_iter = 8
    else:
        k_iter = int(np.ceil(np.log(target) / np.log(sup_half)))
        k_iter = max(1, min(k_iter, 8))
    k_cap = int(np.floor(np.log2(max(radius / (4 * g.h), 2.0))))
    k_iter = min(k_iter, max(1, k_cap))

    levels = []
    for k in range(k_iter + 1):
        sub = d <= radius / 2 ** k
        levels.append(float(qvals[sub].max()))

    return DeGiorgiResult(measure_fraction=fraction, degiorgi_sup=sup_half,
                          eps0=eps0, levels=levels, k_iter=k_iter,
                          mu_hat=sup_half)


# ----------------------------------------------------------------------------
# barrier ordering and region growth
# ----------------------------------------------------------------------------

def _ball_offsets(grid: BallGrid, radius: float) -> np.ndarray:
    """Integer lattice offsets with |offset| * h <= radius."""
    k = int(np.floor(radius / grid.h + 1e-12))
    axes = [np.arange(-k, k + 1)] * grid.dim
    mesh = np.meshgrid(*axes, indexing="ij")
    offs = np.stack([m.ravel() for m in mesh], axis=1).astype(np.int64)
    keep = (offs.astype(float) ** 2).sum(axis=1) * grid.h ** 2 <= radius ** 2 * (1 + 1e-12)
    return offs[keep]


def _gather_ball(grid: BallGrid, node: int, offsets: np.ndarray) -> np.ndarray:
    """Node ids inside the offset stencil centered at a node; drops absentees."""
    cells = grid.offsets[node] + offsets
    ok = ((cells >= grid.box_lo) & (cells < grid.box_lo + grid.box_shape)).all(axis=1)
    strides = np.ones(grid.dim, dtype=np.int64)
    for d in range(grid.dim - 2, -1, -1):
        strides[d] = strides[d + 1] * grid.box_shape[d + 1]
    flat = ((cells[ok] - grid.box_lo) * strides).sum(axis=1)
    ids = grid.idmap[flat]
    return ids[ids >= 0]


@dataclass
class OrderingResult:
    violations: int
    d0: float
    coverage: float
    n_balls: int
    seed_sup: float


def comparison_ordering_check(u: VectorField, sigma: RadialProfile,
                              orbit: OrbitInfo, q: QSpec,
                              seed_center, seed_radius: float) -> OrderingResult:
    """Grow the certified set by barrier balls and count ordering violations.

    A ball center is admissible when its core ball of radius l lies in the
    certified set and the full barrier ball of radius L fits inside the cone
    portion of the grid.  Each placement grows the certified set by a
    sub-lattice shell, so admissibility is propagated to lattice-adjacent
    centers (the admissible region is convex, which makes the lattice flood
    fill the limit of the shell-by-shell repetition); every visited ball is
    still checked nodewise for Q(u) <= sigma(|x - center|) + 5h and balls with
    violations do not propagate.  The reported d0 is the narrowest strip along
    the region boundary (cone walls and outer sphere) outside which every
    cone node ended up certified.
    """
    g = u.grid
    l = sigma.params["l0"]
    L = sigma.params["L"]
    dprime = sigma.params["delta_prime"]
    q_bar = sigma.params["q_bar"]
    slack = 5 * g.h

    center = np.asarray(seed_center, dtype=float)
    dist_seed = np.linalg.norm(g.coords - center, axis=1)
    seed_nodes = dist_seed <= seed_radius
    if not seed_nodes.any():
        raise SeedBallRejected("seed ball contains no nodes")
    qvals = q.eval(u.values)
    seed_sup = float(qvals[seed_nodes].max())
    if seed_sup > q_bar:
        raise SeedBallRejected(
            f"sup Q = {seed_sup:.4g} on the seed ball exceeds q_bar = {q_bar:.4g}")

    certified = seed_nodes.copy()
    in_d, dist_d = cone_distances(g.coords, orbit)
    radii = np.linalg.norm(g.coords, axis=1)
    is_candidate = in_d & (dist_d > L + g.h) & (radii + L <= g.R)

    violations = 0
    n_balls = 0
    if is_candidate.any():
        offs_core = _ball_offsets(g, l)
        offs_full = _ball_offsets(g, L)
        offs_cert = _ball_offsets(g, l + dprime)
        sig_r = sigma.radii
        sig_v = sigma.values
        visited = np.zeros(g.num_nodes, dtype=bool)
        queue = []
        for node in np.nonzero(is_candidate)[0]:
            core = _gather_ball(g, node, offs_core)
            if certified[core].all():
                queue.append(int(node))
                visited[node] = True
        head = 0
        while head < len(queue):
            node = queue[head]
            head += 1
            full = _gather_ball(g, node, offs_full)
            rr = np.linalg.norm(g.coords[full] - g.coords[node], axis=1)
            bound = np.interp(rr, sig_r, sig_v)
            bad = int((qvals[full] > bound + slack).sum())
            n_balls += 1
            if bad:
                violations += bad
                continue
            certified[_gather_ball(g, node, offs_cert)] = True
            for nb in g.neighbors[node]:
                if nb >= 0 and is_candidate[nb] and not visited[nb]:
                    visited[nb] = True
                    queue.append(int(nb))

    cone = in_d & (dist_d > 0)
    strip = np.minimum(dist_d, g.R - radii)
    uncovered = cone & ~certified
    d0 = float(strip[uncovered].max()) + g.h if uncovered.any() else 0.0
    coverage = float(certified[cone].mean()) if cone.any() else 0.0
    return OrderingResult(violations=violations, d0=d0, coverage=coverage,
                          n_balls=n_balls, seed_sup=seed_sup)


# ----------------------------------------------------------------------------
# decay fit, energy scaling, positivity
# ----------------------------------------------------------------------------

def decay_fit(u: VectorField, orbit: OrbitInfo, d_min: float = 1.0,
              d_max: float = 3.0) -> tuple[float, float, float]:
    """Least-squares exponential fit |u - a1| ~ K exp(-k dist) on a depth band.

    Returns (K, k, R^2); raises InsufficientNodes below 50 usable nodes.
    """
    g = u.grid
    in_d, dist = cone_distances(g.coords, orbit)
    dev = np.linalg.norm(u.values - orbit.base_point, axis=1)
    band = in_d & (dist >= d_min) & (dist <= d_max) & (dev > 1e-14)
    if band.sum() < 50:
        raise InsufficientNodes(f"only {int(band.sum())} nodes in the fit band")
    x, y = dist[band], np.log(dev[band])
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(coef[1])), float(-coef[0]), r2


@dataclass
class SweepResult:
    slope: float
    radii: list
    energies: list
    residuals: list
    converged: list


def energy_scaling_sweep(radii, spec: PotentialSpec, group: ReflectionGroup,
                         orbit: OrbitInfo, h: float = 0.1, flow: bool = True,
                         cfg: FlowConfig | None = None) -> SweepResult:
    """Fit log J against log R over per-radius solves (or seed energies).

    Radii that exhaust max_steps without converging or stalling raise
    NoConvergence listing the offenders.
    """
    radii = list(radii)
    if len(radii) < 3:
        raise ValueError("need at least 3 radii")
    energies, residuals, converged, failed = [], [], [], []
    for R in radii:
        g = build_grid(2 if spec.dim == 2 else 3, R, h)
        seed = seed_affine(g, orbit)
        if flow:
            c = cfg or FlowConfig()
            res = run_to_equilibrium(seed, spec, c, group)
            energies.append(res.energy_history[-1])
            residuals.append(res.residual)
            converged.append(res.converged)
            if not res.converged and not res.stalled:
                failed.append(R)
        else:
            energies.append(energy(seed, spec))
            residuals.append(np.nan)
            converged.append(True)
    if failed:
        raise NoConvergence(f"radii {failed} hit max_steps without stalling")
    slope = float(np.polyfit(np.log(radii), np.log(energies), 1)[0])
    return SweepResult(slope=slope, radii=radii, energies=energies,
                       residuals=residuals, converged=converged)


@dataclass
class PositivityResult:
    positivity_min: float
    strong_margin: float
    samples: list


def positivity_check(history: FlowResult, group: ReflectionGroup) -> PositivityResult:
    """Min of <u, eta> over F-bar nodes across checkpoints, plus the final
    strict margin on interior chamber nodes."""
    grid = history.field.grid
    fbar, finterior = chamber_masks(grid, group)
    pos_min = min(v for _, v in history.positivity_samples)
    if group.fund_normals.size and finterior.any():
        dots = history.field.values[finterior] @ group.fund_normals.T
        strong = float(dots.min())
    else:
        strong = np.inf
    return PositivityResult(positivity_min=pos_min, strong_margin=strong,
                            samples=list(history.positivity_samples))
