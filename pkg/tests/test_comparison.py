"""Radial profile tests against closed forms and special-function oracles."""
import numpy as np
import pytest
from scipy.special import iv

from acflow.comparison import (assemble_sigma, glue_phi, phi2_deriv_at,
                               phi2_profile, solve_phi1, theta_profile)
from acflow.errors import DegenerateAnnulus, NoAdmissibleDelta, ProfileOverflow


def test_phi1_boundary_value():
    for n in (1, 2, 3):
        p = solve_phi1(n, 1.7, 0.4, 3.0)
        assert p.values[-1] == pytest.approx(0.4, rel=1e-14)


def test_phi1_cosh_oracle():
    c, qb, l = 2.0, 1.3, 6.0
    p = solve_phi1(1, c, qb, l)
    exact = qb * np.cosh(c * p.radii) / np.cosh(c * l)
    assert np.max(np.abs(p.values - exact) / exact) < 1e-8
    exact_d = qb * c * np.sinh(c * p.radii) / np.cosh(c * l)
    assert np.max(np.abs(p.derivs - exact_d)) < 1e-8 * exact_d.max()


def test_phi1_bessel_oracle_n2():
    c, qb, l = 1.5, 0.8, 5.0
    p = solve_phi1(2, c, qb, l)
    exact = qb * iv(0, c * p.radii) / iv(0, c * l)
    assert np.max(np.abs(p.values - exact) / exact) < 1e-8


def test_phi1_sinh_oracle_n3():
    c, qb, l = 1.2, 0.5, 4.0
    p = solve_phi1(3, c, qb, l)
    r = p.radii[1:]
    exact = qb * (l / r) * np.sinh(c * r) / np.sinh(c * l)
    assert np.max(np.abs(p.values[1:] - exact) / exact) < 1e-8


def test_phi1_slope_limit():
    # slope at the matching radius approaches c * q_bar (n = 1 at c*l = 12)
    c, qb, l = 3.0, 1.0, 4.0
    p = solve_phi1(1, c, qb, l)
    assert abs(p.derivs[-1] - c * qb) <= 0.01 * c * qb


def test_phi1_overflow():
    with pytest.raises(ProfileOverflow):
        solve_phi1(2, 100.0, 1.0, 8.0)


def test_phi1_positive_increasing_with_increasing_slope():
    p = solve_phi1(2, 1.2, 0.7, 5.0)
    assert np.all(p.values > 0)
    assert np.all(np.diff(p.values) > 0)
    assert np.all(np.diff(p.derivs) >= -1e-12)


def test_phi1_slope_strictly_increasing_in_l():
    slopes = [solve_phi1(2, 0.9, 0.3, l).derivs[-1] for l in (1, 2, 4, 8, 12)]
    assert np.all(np.diff(slopes) > 0)


def test_phi1_exponential_bound_rate():
    # h(l) = min average log-slope: the largest rate with
    # phi1(r) <= exp(h (r - l)) phi1(l) on all of [0, l]
    def h_fit(c, l):
        p = solve_phi1(1, c, 1.0, l)
        logs = np.log(p.values)
        r = p.radii[:-1]
        return np.min((logs[-1] - logs[:-1]) / (l - r)), p

    c = 3.0
    rates = []
    for cl in (6.0, 12.0, 40.0):
        rate, p = h_fit(c, cl / c)
        rates.append(rate)
        bound = np.exp(rate * (p.radii - p.radii[-1])) * p.values[-1]
        assert np.all(p.values <= bound * (1 + 1e-9))
    # increasing toward c; 2% closeness holds once c*l is around 40
    assert np.all(np.diff(rates) > 0)
    assert abs(rates[-1] - c) <= 0.02 * c


def test_phi1_second_derivative_bound():
    n, c, qb, l = 2, 1.4, 0.6, 6.0
    p = solve_phi1(n, c, qb, l)
    r = p.radii[1:]
    second = c * c * p.values[1:] - (n - 1) / r * p.derivs[1:]
    assert np.max(second) <= c * c * qb + 1e-10


def test_phi2_boundary_values():
    for n in (2, 3):
        p = phi2_profile(n, 0.3, 1.1, 2.0, 5.0)
        assert p.values[0] == pytest.approx(0.3, abs=1e-14)
        assert p.values[-1] == pytest.approx(1.1, abs=1e-14)


def test_phi2_derivative_example():
    p = phi2_profile(2, 1.0, 2.0, 1.0, np.e)
    assert p.derivs[0] == pytest.approx(1.0, rel=1e-12)


def test_phi2_limit_fixed_lambda():
    lam = 0.37
    l = 100 * lam
    lim = 1.2 / lam
    got = phi2_deriv_at(3, 0.5, 1.7, l, l + lam, l)
    assert abs(got - lim) <= 0.01 * lim * (1 + 1e-9)


def test_phi2_slope_decreasing_in_l():
    lam = 1.0
    for n in (2, 3):
        slopes = [phi2_deriv_at(n, 0.2, 1.5, l, l + lam, l) for l in (1, 2, 5, 10, 40)]
        assert np.all(np.diff(slopes) < 0)


def test_phi2_curvature_bound_stable():
    lam = 1.0
    c0 = []
    for l in (10.0, 20.0, 40.0):
        p = phi2_profile(2, 0.2, 1.5, l, l + lam)
        second = np.diff(p.derivs) / np.diff(p.radii)
        c0.append(l * np.max(np.abs(second)))
    assert max(c0) / min(c0) < 1.1


def test_phi2_degenerate():
    with pytest.raises(DegenerateAnnulus):
        phi2_profile(2, 0.3, 1.0, 2.0, 2.0)


def test_theta_matches_boundary():
    p1 = solve_phi1(2, 1.0, 0.5, 4.0)
    p2 = phi2_profile(2, 0.5, 1.5, 4.0, 8.0)
    th = theta_profile(2, glue_phi(p1, p2), 4.0, 0.25)
    assert th.values[0] == pytest.approx(float(p1.eval(3.75)), rel=1e-12)
    assert th.values[-1] == pytest.approx(float(p2.eval(4.25)), rel=1e-12)


def test_theta_midpoint_slope_first_order():
    c, qb, qm, l = 0.9, 0.23, 2.0, 16.0
    p1 = solve_phi1(2, c, qb, l)
    p2 = phi2_profile(2, qb, qm, l, 32.0)
    avg = 0.5 * (p1.derivs[-1] + p2.derivs[0])
    errs = []
    for d in (0.1, 0.05, 0.025):
        th = theta_profile(2, glue_phi(p1, p2), l, d)
        errs.append(abs(float(th.deriv(l)) - avg))
    # first-order convergence: error roughly halves with delta
    assert errs[1] < 0.7 * errs[0] and errs[2] < 0.7 * errs[1]
    assert errs[0] <= 5.0 * 0.1 * avg


def test_theta_constant_for_equal_boundary_data():
    p2a = phi2_profile(2, 0.7, 0.7 + 1e-300, 3.0, 5.0)  # flat outer piece
    # simpler: direct harmonic bridge with equal Dirichlet data via a flat glue
    p1 = solve_phi1(2, 1.0, 0.7, 4.0)
    glued = glue_phi(p1, phi2_profile(2, 0.7, 0.9, 4.0, 8.0))
    th = theta_profile(2, glued, 4.0, 1e-9)
    assert np.max(th.values) - np.min(th.values) < 1e-6


def test_theta_degenerate():
    p1 = solve_phi1(2, 1.0, 0.5, 4.0)
    p2 = phi2_profile(2, 0.5, 1.5, 4.0, 8.0)
    with pytest.raises(DegenerateAnnulus):
        theta_profile(2, glue_phi(p1, p2), 4.0, 5.0)


def test_assemble_sigma_triangle_constants():
    sigma, consts = assemble_sigma(2, 0.9178, 0.2279, 2.0)
    assert consts["q_bar_prime"] < consts["q_bar"]
    assert consts["mu"] > 0
    assert consts["delta_prime"] > 0
    l0, lam, delta = consts["l0"], consts["lam"], consts["delta"]
    # clause (i) at the three tested scales
    for lt in (l0, 2 * l0, 4 * l0):
        p1 = solve_phi1(2, consts["c"], consts["q_bar"], lt)
        slope2 = phi2_deriv_at(2, consts["q_bar"], consts["q_max"], lt, lt + lam, lt)
        assert p1.derivs[-1] > slope2 + consts["mu"]
    # clause (ii): bridge strictly below the glued profile
    for lt in (l0, 2 * l0, 4 * l0):
        p1 = solve_phi1(2, consts["c"], consts["q_bar"], lt)
        p2 = phi2_profile(2, consts["q_bar"], consts["q_max"], lt, lt + lam)
        th = theta_profile(2, glue_phi(p1, p2), lt, delta)
        rr = th.radii[1:-1]
        phi_vals = np.where(rr <= lt, p1.eval(np.minimum(rr, lt)),
                            p2.eval(np.maximum(rr, lt)))
        assert np.all(th.values[1:-1] < phi_vals)
        # clause (iii): barrier at most q_bar_prime out to l + delta_prime
        assert float(th.eval(lt + consts["delta_prime"])) <= consts["q_bar_prime"]
    # continuity of the glued barrier at the glue radii
    p1 = solve_phi1(2, consts["c"], consts["q_bar"], l0)
    p2 = phi2_profile(2, consts["q_bar"], consts["q_max"], l0, l0 + lam)
    th = theta_profile(2, glue_phi(p1, p2), l0, delta)
    assert abs(float(th.eval(l0 - delta)) - float(p1.eval(l0 - delta))) < 1e-10
    assert abs(float(th.eval(l0 + delta)) - float(p2.eval(l0 + delta))) < 1e-10


def test_sigma_eval_matches_pieces():
    sigma, consts = assemble_sigma(2, 3.0, 0.5, 1.0)
    l0, delta = consts["l0"], consts["delta"]
    p1 = solve_phi1(2, 3.0, 0.5, l0)
    deep = p1.radii[p1.radii < l0 - delta]
    assert np.allclose(sigma.eval(deep), p1.eval(deep), atol=1e-10)
