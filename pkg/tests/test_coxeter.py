"""Group algebra tests: closure, orbits, chambers, cone geometry."""
import numpy as np
import pytest

from acflow.coxeter import (Reflection, ReflectionGroup, generate_group,
                            map_to_chamber, orbit_and_stabilizer, reflect,
                            region_geometry)
from acflow.errors import ClosureOverflow, NotInClosure


def mirror_normal(angle):
    """Unit normal of the mirror line at the given angle (n=2)."""
    return np.array([-np.sin(angle), np.cos(angle)])


def dihedral(m):
    """Group generated by mirrors at angle pi/m apart."""
    return generate_group([Reflection(mirror_normal(0.0)),
                           Reflection(mirror_normal(np.pi / m))])


def test_reflect_fixes_hyperplane():
    r = Reflection(np.array([0.0, 1.0]))
    x = np.array([2.5, 0.0])
    assert np.allclose(reflect(x, r), x)


def test_reflect_coordinate_mirror():
    r = Reflection(np.array([0.0, 1.0]))
    assert np.allclose(reflect(np.array([3.0, 4.0]), r), [3.0, -4.0])


def test_reflect_involution():
    r = Reflection(np.array([np.sin(np.pi / 3), -np.cos(np.pi / 3)]))
    x = np.array([1.0, 2.0])
    assert np.allclose(reflect(reflect(x, r), r), x, atol=1e-12)


def test_trivial_group():
    g = generate_group([], dim=2)
    assert g.order == 1
    assert np.allclose(g.elements[0], np.eye(2))


@pytest.mark.parametrize("m,order", [(2, 4), (3, 6), (4, 8), (6, 12)])
def test_dihedral_orders(m, order):
    assert dihedral(m).order == order


def test_closure_and_involutions():
    g = dihedral(3)
    # closure: every pairwise product is an element
    for a in g.elements:
        for b in g.elements:
            prod = a @ b
            assert any(np.max(np.abs(prod - e)) < 1e-9 for e in g.elements)
    # every stored reflection squares to the identity
    for r in g.reflections:
        assert np.max(np.abs(r @ r - np.eye(2))) < 1e-12


def test_all_elements_orthogonal():
    g = dihedral(4)
    for e in g.elements:
        assert np.max(np.abs(e.T @ e - np.eye(2))) < 1e-10


def test_closure_cap():
    with pytest.raises(ClosureOverflow):
        # irrational mirror angle generates an infinite dihedral closure
        generate_group([Reflection(mirror_normal(0.0)),
                        Reflection(mirror_normal(1.0))], cap=64)


def test_fundamental_chamber_partition():
    g = dihedral(3)
    rng = np.random.default_rng(7)
    for _ in range(1000):
        v = rng.standard_normal(2)
        v /= np.linalg.norm(v)
        hits = 0
        for e in g.elements:
            dots = g.chamber_dots(e @ v)
            if np.min(dots) > 1e-9:
                hits += 1
        # either strictly inside exactly one chamber copy, or on a mirror
        on_mirror = any(abs(v @ eta) < 1e-9 for eta in g.fund_normals) or hits == 0
        assert hits == 1 or on_mirror


def test_orbit_stabilizer_on_mirror():
    g = dihedral(3)
    info = orbit_and_stabilizer(g, np.array([1.0, 0.0]))
    assert len(info.stabilizer) == 2
    assert info.count == 3
    assert info.count * len(info.stabilizer) == g.order
    # oracle: count distinct images by direct enumeration
    images = [e @ np.array([1.0, 0.0]) for e in g.elements]
    distinct = []
    for im in images:
        if all(np.linalg.norm(im - p) > 1e-8 for p in distinct):
            distinct.append(im)
    assert len(distinct) == info.count
    d = np.linalg.norm(info.orbit[:, None, :] - info.orbit[None, :, :], axis=-1)
    assert np.min(d[~np.eye(info.count, dtype=bool)]) > 1e-8


def test_orbit_stabilizer_interior_point():
    g = dihedral(3)
    a1 = 0.9 * g.seed_dir
    info = orbit_and_stabilizer(g, a1)
    assert len(info.stabilizer) == 1
    assert info.count == 6


def test_orbit_trivial_group():
    g = generate_group([], dim=2)
    info = orbit_and_stabilizer(g, np.array([0.3, 0.1]))
    assert info.count == 1


def test_base_point_outside_chamber():
    g = dihedral(3)
    with pytest.raises(NotInClosure):
        orbit_and_stabilizer(g, np.array([-1.0, -0.5]))


def test_region_D_sector():
    # D for a1=(1,0) under the triangle group is the sector |theta| < pi/3
    g = dihedral(3)
    info = orbit_and_stabilizer(g, np.array([1.0, 0.0]))
    assert info.region_D_normals.shape[0] == 2
    x = np.array([5.0, 0.0])
    in_f, in_d, dist = region_geometry(x, info)
    assert in_d
    assert dist == pytest.approx(5.0 * np.sin(np.pi / 3), rel=1e-12)


def test_region_geometry_boundary_and_origin():
    g = dihedral(3)
    info = orbit_and_stabilizer(g, np.array([1.0, 0.0]))
    # point on the 60-degree bounding mirror of D
    x = 2.0 * np.array([np.cos(np.pi / 3), np.sin(np.pi / 3)])
    _, in_d, dist = region_geometry(x, info)
    assert not in_d and dist == 0.0
    _, in_d0, dist0 = region_geometry(np.zeros(2), info)
    assert not in_d0 and dist0 == 0.0


def test_region_D_invariant_under_stabilizer():
    g = dihedral(3)
    info = orbit_and_stabilizer(g, np.array([1.0, 0.0]))
    rng = np.random.default_rng(11)
    pts = rng.standard_normal((200, 2))
    for s in info.stabilizer:
        for x in pts:
            _, in_d, _ = region_geometry(x, info)
            _, in_d_s, _ = region_geometry(s @ x, info)
            assert in_d == in_d_s


def test_map_to_chamber():
    g = dihedral(6)
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.standard_normal(2)
        _, y = map_to_chamber(g, x)
        assert g.in_closed_chamber(y)
        assert np.linalg.norm(y) == pytest.approx(np.linalg.norm(x), rel=1e-12)


def test_a3_tetrahedral_group_order():
    # three mirrors of the A3 root system: order 24
    gens = [Reflection.from_vector(v) for v in
            [np.array([1.0, -1.0, 0.0]), np.array([0.0, 1.0, -1.0]),
             np.array([0.0, 1.0, 1.0])]]
    g = generate_group(gens)
    assert g.order == 24
    assert len(g.reflections) == 6
