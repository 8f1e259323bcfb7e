"""Grid, stencil, energy, symmetrization, and seed tests."""
import numpy as np
import pytest

from acflow.coxeter import (Reflection, generate_group, orbit_and_stabilizer)
from acflow.errors import GridTooLarge
from acflow.field import (VectorField, build_grid, chamber_masks,
                          dirichlet_pairing, energy, equivariance_residual,
                          interp_at, laplacian, load_field_csv, project_to_ball,
                          resample, save_field_csv, seed_affine, symmetrize)
from acflow.potential import make_triangle_potential


def triangle_group():
    return generate_group([Reflection(np.array([0.0, 1.0])),
                           Reflection(np.array([-np.sin(np.pi / 3),
                                                np.cos(np.pi / 3)]))])


def square_group():
    # mirrors on both axes map the lattice to itself exactly
    return generate_group([Reflection(np.array([0.0, 1.0])),
                           Reflection(np.array([1.0, 0.0]))])


@pytest.fixture(scope="module")
def spec():
    return make_triangle_potential()


def test_node_count_small():
    g = build_grid(2, 4.0, 0.5)
    count = sum(1 for i in range(-8, 9) for j in range(-8, 9)
                if (i * i + j * j) * 0.25 <= 16.0)
    assert g.num_nodes == count


def test_thirteen_nodes():
    # R=1, h=0.5: lattice points with i^2+j^2 <= 4
    g = build_grid(2, 1.0, 0.5, node_cap=10_000)
    assert g.num_nodes == 13


def test_spacing_precondition():
    with pytest.raises(ValueError):
        build_grid(2, 1.0, 2.0)


def test_node_cap():
    with pytest.raises(GridTooLarge):
        build_grid(2, 8.0, 0.1, node_cap=100)


def test_node_count_area():
    R, h = 4.0, 0.2  # R/h = 20
    g = build_grid(2, R, h)
    assert g.num_nodes * h * h == pytest.approx(np.pi * R * R, rel=0.1)


def test_neighbor_table_symmetric():
    g = build_grid(2, 2.0, 0.25)
    for i in range(g.num_nodes):
        for d in range(2):
            j = g.neighbors[i, 2 * d]
            if j >= 0:
                assert g.neighbors[j, 2 * d + 1] == i


def test_laplacian_constant_zero_everywhere():
    g = build_grid(2, 2.0, 0.25)
    u = VectorField(g, np.tile([1.7, -0.3], (g.num_nodes, 1)))
    lap = laplacian(u)
    assert np.max(np.abs(lap.values)) == 0.0


def test_laplacian_exact_on_quadratic():
    g = build_grid(2, 2.0, 0.25)
    vals = np.repeat((g.coords ** 2).sum(axis=1)[:, None], 2, axis=1)
    lap = laplacian(VectorField(g, vals))
    interior = g.interior_mask()
    assert np.allclose(lap.values[interior], 2 * g.dim, atol=1e-9)


def test_laplacian_zero_on_linear():
    g = build_grid(2, 2.0, 0.25)
    A = np.array([[0.3, -1.2], [0.7, 0.4]])
    lap = laplacian(VectorField(g, g.coords @ A.T))
    assert np.max(np.abs(lap.values[g.interior_mask()])) < 1e-12


def test_summation_by_parts():
    g = build_grid(2, 2.0, 0.1)
    rng = np.random.default_rng(3)
    bump = np.exp(-((g.coords ** 2).sum(axis=1)) / 0.3)
    bump[np.linalg.norm(g.coords, axis=1) > 1.2] = 0.0
    a = bump * rng.standard_normal(g.num_nodes)
    b = bump * rng.standard_normal(g.num_nodes)
    lap_a = laplacian(VectorField(g, a[:, None])).values[:, 0]
    lhs = float((lap_a * b).sum()) * g.cell_volume
    rhs = -dirichlet_pairing(a, b, g)
    assert lhs == pytest.approx(rhs, abs=1e-10 * max(1.0, abs(lhs)))


def test_energy_at_minimum(spec):
    g = build_grid(2, 2.0, 0.25)
    u = VectorField(g, np.tile(spec.minima[0], (g.num_nodes, 1)))
    assert energy(u, spec) == pytest.approx(0.0, abs=1e-12)


def test_energy_of_zero_field(spec):
    R, h = 4.0, 0.1  # R/h = 40
    g = build_grid(2, R, h)
    u = VectorField(g, np.zeros((g.num_nodes, 2)))
    assert energy(u, spec) == pytest.approx(np.pi * R * R, rel=0.03)


def test_energy_quadrature_refinement(spec):
    def smooth_field(g):
        x, y = g.coords[:, 0], g.coords[:, 1]
        return VectorField(g, np.stack([np.sin(x) * np.cos(y), np.cos(x)], axis=1))

    vals = []
    for h in (0.2, 0.1):
        g = build_grid(2, 4.0, h)
        vals.append(energy(smooth_field(g), spec))
    assert abs(vals[1] - vals[0]) / abs(vals[0]) < 0.02


def test_symmetrize_constant_averages_to_zero():
    g = build_grid(2, 2.0, 0.1)
    grp = triangle_group()
    u = VectorField(g, np.tile([0.8, 0.25], (g.num_nodes, 1)))
    s = symmetrize(u, grp)
    assert np.max(np.abs(s.values)) < 1e-12


def test_symmetrize_idempotent_lattice_group():
    g = build_grid(2, 2.0, 0.25)
    grp = square_group()
    rng = np.random.default_rng(9)
    u = VectorField(g, rng.standard_normal((g.num_nodes, 2)))
    s1 = symmetrize(u, grp)
    s2 = symmetrize(s1, grp)
    assert np.max(np.abs(s2.values - s1.values)) < 1e-9


def test_symmetrize_preserves_equivariant_smooth_field():
    g = build_grid(2, 2.0, 0.1)
    grp = triangle_group()
    x, y = g.coords[:, 0], g.coords[:, 1]
    smooth = VectorField(g, 0.5 * np.stack([np.sin(x) * y, np.cos(x + y)], axis=1))
    u = symmetrize(smooth, grp)
    s = symmetrize(u, grp)
    inner = np.linalg.norm(g.coords, axis=1) <= g.R - 3 * g.h
    diff = np.linalg.norm(s.values - u.values, axis=1)[inner].max()
    assert diff <= 5 * g.h ** 2


def test_symmetrize_output_equivariance():
    g = build_grid(2, 2.0, 0.1)
    grp = triangle_group()
    x, y = g.coords[:, 0], g.coords[:, 1]
    smooth = VectorField(g, 0.4 * np.stack([np.sin(x), x * np.exp(-y * y)], axis=1))
    u = symmetrize(smooth, grp)
    assert equivariance_residual(u, grp) <= 5 * g.h ** 2


def test_seed_affine_values(spec):
    grp = triangle_group()
    info = orbit_and_stabilizer(grp, np.array([1.0, 0.0]))
    g = build_grid(2, 4.0, 0.1)
    seed = seed_affine(g, info)
    # deep along the a1 ray: exactly a1
    deep = np.argmin(np.linalg.norm(g.coords - np.array([3.0, 0.0]), axis=1))
    assert np.allclose(seed.values[deep], [1.0, 0.0], atol=1e-12)
    # on the cone boundary (60-degree ray): zero
    edge_pt = 2.0 * np.array([np.cos(np.pi / 3), np.sin(np.pi / 3)])
    edge = np.argmin(np.linalg.norm(g.coords - edge_pt, axis=1))
    assert np.linalg.norm(seed.values[edge]) < 0.2  # within a cell of the ramp foot
    # equivariant by construction
    assert equivariance_residual(seed, grp) <= 5 * g.h ** 2 + 1e-9
    # positive: F-bar nodes map into F-bar
    fbar, _ = chamber_masks(g, grp)
    dots = seed.values[fbar] @ grp.fund_normals.T
    assert dots.min() >= -1e-12


def test_seed_energy_scales_linearly(spec):
    grp = triangle_group()
    info = orbit_and_stabilizer(grp, np.array([1.0, 0.0]))
    vals = []
    radii = [4.0, 8.0, 16.0]
    for R in radii:
        g = build_grid(2, R, 0.1)
        vals.append(energy(seed_affine(g, info), spec))
    slope = np.polyfit(np.log(radii), np.log(vals), 1)[0]
    assert 0.8 <= slope <= 1.2
    assert vals[2] / radii[2] <= 1.5 * vals[0] / radii[0]


def test_project_to_ball():
    g = build_grid(2, 1.0, 0.125)
    vals = np.tile([3.0, 4.0], (g.num_nodes, 1))
    p = project_to_ball(VectorField(g, vals), 1.0)
    assert np.allclose(p.values, np.tile([0.6, 0.8], (g.num_nodes, 1)))
    small = VectorField(g, 0.3 * vals / 5.0)
    assert np.array_equal(project_to_ball(small, 1.0).values, small.values)


def test_project_nonexpansive_idempotent():
    g = build_grid(2, 1.0, 0.125)
    rng = np.random.default_rng(21)
    a = rng.standard_normal((g.num_nodes, 2)) * 2
    b = rng.standard_normal((g.num_nodes, 2)) * 2
    pa = project_to_ball(VectorField(g, a), 1.0).values
    pb = project_to_ball(VectorField(g, b), 1.0).values
    assert np.all(np.linalg.norm(pa - pb, axis=1) <= np.linalg.norm(a - b, axis=1) + 1e-12)
    paa = project_to_ball(VectorField(g, pa), 1.0).values
    assert np.max(np.abs(paa - pa)) < 1e-12


def test_project_commutes_with_rotations():
    grp = triangle_group()
    g = build_grid(2, 1.0, 0.125)
    rng = np.random.default_rng(33)
    vals = rng.standard_normal((g.num_nodes, 2)) * 2
    for mat in grp.elements:
        left = project_to_ball(VectorField(g, vals @ mat.T), 1.0).values
        right = project_to_ball(VectorField(g, vals), 1.0).values @ mat.T
        assert np.max(np.abs(left - right)) < 1e-12


def test_field_csv_roundtrip(tmp_path):
    g = build_grid(2, 1.0, 0.125)
    rng = np.random.default_rng(1)
    u = VectorField(g, rng.standard_normal((g.num_nodes, 2)))
    path = tmp_path / "field.csv"
    save_field_csv(u, path)
    v = load_field_csv(path, g)
    assert np.array_equal(u.values, v.values)


def test_interp_matches_nodes():
    g = build_grid(2, 2.0, 0.25)
    rng = np.random.default_rng(2)
    u = VectorField(g, rng.standard_normal((g.num_nodes, 2)))
    got = interp_at(u, g.coords)
    assert np.max(np.abs(got - u.values)) < 1e-12


def test_three_dimensional_grid_and_stencil():
    g = build_grid(3, 1.5, 0.25)
    assert g.neighbors.shape == (g.num_nodes, 6)
    vals = np.repeat((g.coords ** 2).sum(axis=1)[:, None], 3, axis=1)
    lap = laplacian(VectorField(g, vals))
    assert np.allclose(lap.values[g.interior_mask()], 6.0, atol=1e-9)
    # tetrahedral-symmetry seed stays inside the chamber
    gens = [Reflection.from_vector(v) for v in
            [np.array([1.0, -1.0, 0.0]), np.array([0.0, 1.0, -1.0]),
             np.array([0.0, 1.0, 1.0])]]
    grp3 = generate_group(gens)
    info = orbit_and_stabilizer(grp3, grp3.seed_dir)
    seed = seed_affine(g, info)
    fbar, _ = chamber_masks(g, grp3)
    assert (seed.values[fbar] @ grp3.fund_normals.T).min() >= -1e-12


def test_resample_smooth():
    coarse = build_grid(2, 2.0, 0.2)
    fine = build_grid(2, 2.0, 0.1)
    f = lambda X: np.stack([np.sin(X[:, 0]), X[:, 1] ** 2 / 4], axis=1)
    u = VectorField(coarse, f(coarse.coords))
    v = resample(u, fine)
    inner = np.linalg.norm(fine.coords, axis=1) <= 1.5
    err = np.linalg.norm(v.values - f(fine.coords), axis=1)[inner].max()
    assert err < 0.02
