"""Radial comparison profiles: modified-Bessel-type core, harmonic annulus, glue."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAnnulus, NoAdmissibleDelta, ProfileOverflow

GRID_POINTS = 2048
MAX_CL = 700.0          # exp growth beyond this overflows double precision


@dataclass
class RadialProfile:
    kind: str                    # phi1 | phi2 | theta | phi | sigma
    radii: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    params: dict = field(default_factory=dict)

    def eval(self, r):
        """Cubic-Hermite evaluation on the stored grid (scalar or array)."""
        r = np.asarray(r, dtype=float)
        x = self.radii
        i = np.clip(np.searchsorted(x, r) - 1, 0, x.size - 2)
        h = x[i + 1] - x[i]
        t = (r - x[i]) / h
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t * t * (3 - 2 * t)
        h11 = t * t * (t - 1)
        return (h00 * self.values[i] + h10 * h * self.derivs[i]
                + h01 * self.values[i + 1] + h11 * h * self.derivs[i + 1])

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        x = self.radii
        i = np.clip(np.searchsorted(x, r) - 1, 0, x.size - 2)
        h = x[i + 1] - x[i]
        t = (r - x[i]) / h
        dh00 = 6 * t * (t - 1) / h
        dh10 = (1 - t) * (1 - 3 * t)
        dh01 = -6 * t * (t - 1) / h
        dh11 = t * (3 * t - 2)
        return (dh00 * self.values[i] + dh10 * self.derivs[i]
                + dh01 * self.values[i + 1] + dh11 * self.derivs[i + 1])


def _phi1_series(r, c, n, terms=6):
    """Regular solution near r = 0: phi = sum a_k r^{2k}, a_0 = 1."""
    val = np.zeros_like(r)
    der = np.zeros_like(r)
    a = 1.0
    for k in range(terms):
        val += a * r ** (2 * k)
        if k > 0:
            der += 2 * k * a * r ** (2 * k - 1)
        a = a * c * c / ((2 * k + 2) * (2 * k + n))
    return val, der


def solve_phi1(n: int, c: float, q_bar: float, l: float,
               num: int = GRID_POINTS) -> RadialProfile:
    """Solve phi'' + (n-1)/r phi' = c^2 phi, phi'(0) = 0, phi(l) = q_bar.

    Integrates the regular solution from a series start with fixed-step RK4,
    then rescales so the boundary value matches.
    """
    if min(l, c, q_bar) <= 0:
        raise ValueError("l, c, q_bar must be positive")
    if c * l > MAX_CL:
        raise ProfileOverflow(f"c*l = {c * l:.3g} > {MAX_CL}; rescale the problem")

    r0 = min(1e-3 / c, 0.1 * l)
    radii = np.linspace(0.0, l, num)
    nsub = max(4096, 4 * num)
    hstep = (l - r0) / nsub

    def rhs(r, phi, psi):
        dpsi = c * c * phi
        if n > 1 and r > 0:
            dpsi -= (n - 1) / r * psi
        return psi, dpsi

    phi0, psi0 = _phi1_series(np.array([r0]), c, n)
    phi, psi = float(phi0[0]), float(psi0[0])
    rr = r0
    vals = np.empty(num)
    ders = np.empty(num)
    series_mask = radii <= r0
    vals[series_mask], ders[series_mask] = _phi1_series(radii[series_mask], c, n)
    out_idx = int(series_mask.sum())

    for _ in range(nsub):
        target = rr + hstep
        k1 = rhs(rr, phi, psi)
        k2 = rhs(rr + hstep / 2, phi + hstep / 2 * k1[0], psi + hstep / 2 * k1[1])
        k3 = rhs(rr + hstep / 2, phi + hstep / 2 * k2[0], psi + hstep / 2 * k2[1])
        k4 = rhs(target, phi + hstep * k3[0], psi + hstep * k3[1])
        phi_new = phi + hstep / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        psi_new = psi + hstep / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        # fill output points passed in this substep by Hermite interpolation
        while out_idx < num and radii[out_idx] <= target + 1e-15:
            t = (radii[out_idx] - rr) / hstep
            h00 = (1 + 2 * t) * (1 - t) ** 2
            h10 = t * (1 - t) ** 2
            h01 = t * t * (3 - 2 * t)
            h11 = t * t * (t - 1)
            vals[out_idx] = (h00 * phi + h10 * hstep * psi
                             + h01 * phi_new + h11 * hstep * psi_new)
            ders[out_idx] = (6 * t * (t - 1) / hstep * phi + (1 - t) * (1 - 3 * t) * psi
                             - 6 * t * (t - 1) / hstep * phi_new + t * (3 * t - 2) * psi_new)
            out_idx += 1
        phi, psi, rr = phi_new, psi_new, target
        if not np.isfinite(phi):
            raise ProfileOverflow("phi_1 integration overflowed")

    scale = q_bar / phi
    vals *= scale
    ders *= scale
    vals[-1] = q_bar
    ders[-1] = psi * scale
    return RadialProfile(kind="phi1", radii=radii, values=vals, derivs=ders,
                         params={"n": n, "c": c, "q_bar": q_bar, "l": l})


def phi2_profile(n: int, q_bar: float, q_max: float, l: float, L: float,
                 num: int = GRID_POINTS) -> RadialProfile:
    """Harmonic radial profile on the annulus [l, L] with values q_bar -> q_max."""
    if L <= l:
        raise DegenerateAnnulus(f"need L > l, got l={l}, L={L}")
    radii = np.linspace(l, L, num)
    dq = q_max - q_bar
    if n == 1:
        vals = q_bar + dq * (radii - l) / (L - l)
        ders = np.full(num, dq / (L - l))
    elif n == 2:
        vals = q_bar + dq * np.log(radii / l) / np.log(L / l)
        ders = dq / (radii * np.log(L / l))
    else:
        p = n - 2
        denom = l ** (2 - n) - L ** (2 - n)
        vals = q_bar + dq * (l ** (2 - n) - radii ** (2 - n)) / denom
        ders = p * l ** p * dq / (radii ** (n - 1) * (1 - (l / L) ** p))
    return RadialProfile(kind="phi2", radii=radii, values=vals, derivs=ders,
                         params={"n": n, "q_bar": q_bar, "q_max": q_max,
                                 "l": l, "L": L})


def phi2_deriv_at(n: int, q_bar: float, q_max: float, l: float, L: float,
                  r: float) -> float:
    """Closed-form slope of the annulus profile at radius r."""
    dq = q_max - q_bar
    if n == 1:
        return dq / (L - l)
    if n == 2:
        return dq / (r * np.log(L / l))
    p = n - 2
    return p * l ** p * dq / (r ** (n - 1) * (1 - (l / L) ** p))


def glue_phi(phi1: RadialProfile, phi2: RadialProfile) -> RadialProfile:
    """Piecewise profile: the core solution up to l, the annulus beyond."""
    l = phi1.params["l"]
    radii = np.concatenate([phi1.radii, phi2.radii[1:]])
    vals = np.concatenate([phi1.values, phi2.values[1:]])
    ders = np.concatenate([phi1.derivs, phi2.derivs[1:]])
    return RadialProfile(kind="phi", radii=radii, values=vals, derivs=ders,
                         params={"l": l, "phi1": phi1, "phi2": phi2})


def theta_profile(n: int, phi: RadialProfile, l: float, delta: float,
                  num: int = 512) -> RadialProfile:
    """Harmonic bridge on [l - delta, l + delta] matching the glued profile."""
    if not 0 < delta < l:
        raise DegenerateAnnulus(f"need 0 < delta < l, got delta={delta}, l={l}")
    a, b = l - delta, l + delta
    va = float(phi.params["phi1"].eval(a)) if "phi1" in phi.params else float(phi.eval(a))
    vb = float(phi.params["phi2"].eval(b)) if "phi2" in phi.params else float(phi.eval(b))
    radii = np.linspace(a, b, num)
    dv = vb - va
    if n == 1:
        vals = va + dv * (radii - a) / (b - a)
        ders = np.full(num, dv / (b - a))
    elif n == 2:
        vals = va + dv * np.log(radii / a) / np.log(b / a)
        ders = dv / (radii * np.log(b / a))
    else:
        p = n - 2
        denom = a ** (2 - n) - b ** (2 - n)
        vals = va + dv * (a ** (2 - n) - radii ** (2 - n)) / denom
        ders = p * a ** p * dv / (radii ** (n - 1) * (1 - (a / b) ** p))
    return RadialProfile(kind="theta", radii=radii, values=vals, derivs=ders,
                         params={"n": n, "l": l, "delta": delta, "va": va, "vb": vb})


def _sigma_from_pieces(phi1, phi2, theta, l, delta):
    """Assemble the glued barrier on one radial grid."""
    m1 = phi1.radii < l - delta
    m2 = phi2.radii > l + delta
    radii = np.concatenate([phi1.radii[m1], theta.radii, phi2.radii[m2]])
    vals = np.concatenate([phi1.values[m1], theta.values, phi2.values[m2]])
    ders = np.concatenate([phi1.derivs[m1], theta.derivs, phi2.derivs[m2]])
    return radii, vals, ders


def assemble_sigma(n: int, c: float, q_bar: float, q_max: float,
                   l0_hint: float | None = None, rho: float = 0.5,
                   bisect_max: int = 40) -> tuple[RadialProfile, dict]:
    """Construct the barrier: find l0 where the core out-slopes the annulus,
    fix the annulus width, then shrink the bridge half-width until the bridge
    sits strictly below the glued profile and the barrier stays under q_bar.

    Returns (sigma profile at l0, constants {l0, lam, delta, q_bar_prime,
    delta_prime, mu, rho}).
    """
    if min(c, q_bar, q_max) <= 0 or q_max <= q_bar:
        raise ValueError("need 0 < q_bar < q_max and c > 0")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")

    l = l0_hint if l0_hint and l0_hint > 0 else 0.5 / c
    l0 = mu = None
    while c * l <= MAX_CL / 4:
        L = l / rho
        p1 = solve_phi1(n, c, q_bar, l, num=256)
        gap = float(p1.derivs[-1]) - phi2_deriv_at(n, q_bar, q_max, l, L, l)
        if gap > 0:
            l0, mu = l, gap / 2
            break
        l *= 1.15
    if l0 is None:
        raise ProfileOverflow("no slope gap found before the overflow bound")
    lam = l0 * (1.0 / rho - 1.0)

    test_ls = [l0, 2 * l0, 4 * l0]
    profiles = {}
    for lt in test_ls:
        p1 = solve_phi1(n, c, q_bar, lt)
        p2 = phi2_profile(n, q_bar, q_max, lt, lt + lam)
        gap_t = float(p1.derivs[-1]) - float(p2.derivs[0])
        if gap_t <= mu:
            raise NoAdmissibleDelta(
                f"slope gap {gap_t:.3g} at l={lt} does not clear mu={mu:.3g}")
        profiles[lt] = (p1, p2)

    delta = min(lam, l0) / 4
    for _ in range(bisect_max):
        ok = True
        for lt in test_ls:
            p1, p2 = profiles[lt]
            th = theta_profile(n, glue_phi(p1, p2), lt, delta)
            # bridge strictly below the glued profile away from the endpoints
            rr = th.radii[1:-1]
            phi_vals = np.where(rr <= lt, p1.eval(np.minimum(rr, lt)),
                                p2.eval(np.maximum(rr, lt)))
            if np.any(th.values[1:-1] >= phi_vals - 1e-14 * q_bar):
                ok = False
                break
        if ok:
            break
        delta /= 2
    else:
        raise NoAdmissibleDelta("bisection exhausted without admissible delta")

    # The bridge dips below q_bar at the kink by about mu*delta and climbs
    # back through it just after; delta_prime stays inside half that dip.
    delta_prime = np.inf
    for lt in test_ls:
        p1, p2 = profiles[lt]
        th = theta_profile(n, glue_phi(p1, p2), lt, delta)
        dip = q_bar - float(th.eval(lt))
        if dip <= 0:
            raise NoAdmissibleDelta("bridge does not dip below the core level")
        delta_prime = min(delta_prime, dip / (2 * float(th.deriv(lt))))
    max_sigma = 0.0
    for lt in test_ls:
        p1, p2 = profiles[lt]
        th = theta_profile(n, glue_phi(p1, p2), lt, delta)
        max_sigma = max(max_sigma, float(th.eval(lt + delta_prime)))
    if max_sigma >= q_bar:
        raise NoAdmissibleDelta("barrier exceeds q_bar within delta_prime")
    q_bar_prime = 0.5 * (max_sigma + q_bar)

    p1, p2 = profiles[l0]
    th = theta_profile(n, glue_phi(p1, p2), l0, delta)
    radii, vals, ders = _sigma_from_pieces(p1, p2, th, l0, delta)
    constants = {"l0": l0, "lam": lam, "delta": delta, "delta_prime": delta_prime,
                 "q_bar_prime": q_bar_prime, "mu": mu, "rho": rho, "c": c,
                 "q_bar": q_bar, "q_max": q_max, "L": l0 + lam, "n": n}
    sigma = RadialProfile(kind="sigma", radii=radii, values=vals, derivs=ders,
                          params=constants)
    return sigma, constants
