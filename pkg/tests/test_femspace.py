import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from p1rt0.femspace import (BoundarySpec, DofMap, br_bubble, cr_basis, edge_fluxes,
                            edge_mean_flux, interp_composite, interp_nodal, interp_rt,
                            local_values, mixed_right, p1_basis, project_p0, rt0_basis)
from p1rt0.mesh import LOCAL_EDGES, generate_perturbed_unit_square, generate_structured_unit_square
from p1rt0.quadrature import triangle_rule

from conftest import reference_triangle


def _edge_points(mesh, e, s):
    a, b = mesh.vertices[mesh.edges[e]]
    return a + np.outer(s, b - a)


def test_rt0_normal_trace_on_reference_cell():
    m = reference_triangle()
    for e in m.cell_edges[0]:
        value, _ = rt0_basis(m, 0, e)
        for f in m.cell_edges[0]:
            pts = _edge_points(m, f, np.linspace(0, 1, 5))
            vn = value(pts) @ m.edge_normals[f]
            if f == e:
                assert np.allclose(vn, vn[0], atol=1e-14)
                assert abs(vn[0]) == pytest.approx(1.0)
            else:
                assert np.allclose(vn, 0.0, atol=1e-14)


def test_rt0_trace_continuous_across_interior_edges(grids):
    m = grids(4)
    for e in m.interior_edges[:10]:
        t0, t1 = m.edge_cells[e]
        pts = _edge_points(m, e, np.array([0.2, 0.7]))
        v0 = rt0_basis(m, t0, e)[0](pts) @ m.edge_normals[e]
        v1 = rt0_basis(m, t1, e)[0](pts) @ m.edge_normals[e]
        assert np.allclose(v0, 1.0) and np.allclose(v1, 1.0)


def test_rt0_divergence_integral():
    m = reference_triangle()
    for e in m.cell_edges[0]:
        k = list(m.cell_edges[0]).index(e)
        _, div = rt0_basis(m, 0, e)
        assert div * m.areas[0] == pytest.approx(m.cell_edge_signs[0, k] * m.edge_lengths[e])


def test_p1_hats_partition_of_unity():
    m = generate_perturbed_unit_square(3, seed=1)
    pts = m.map_to_cells(triangle_rule(2)[0])[5]
    hats = [p1_basis(m, 5, i) for i in range(3)]
    total = sum(h(pts) for h, _ in hats)
    assert np.allclose(total, 1.0)
    for i, (h, _) in enumerate(hats):
        assert np.allclose([h(m.cell_points[5, j]) for j in range(3)], np.eye(3)[i])


def test_cr_basis_edge_means():
    m = generate_perturbed_unit_square(2, seed=4)
    for k in range(3):
        value, _ = cr_basis(m, 3, k)
        for j in range(3):
            e = m.cell_edges[3, j]
            mid = m.edge_midpoints[e]
            assert value(mid) == pytest.approx(float(k == j), abs=1e-14)


def test_br_bubble_vanishes_on_other_edges():
    m = reference_triangle()
    for k in range(3):
        b = br_bubble(m, 0, k)
        for j in range(3):
            e = m.cell_edges[0, j]
            pts = _edge_points(m, e, np.array([0.3, 0.5]))
            if j == k:
                assert np.allclose(b(pts[1:]) @ m.edge_normals[e], 0.25)
            else:
                assert np.allclose(b(pts), 0.0, atol=1e-15)


def test_local_values_shapes():
    m = reference_triangle()
    bary = triangle_rule(2)[0]
    assert local_values(m, "p1rt0", bary).shape == (1, 9, 3, 2)
    assert local_values(m, "br", bary).shape == (1, 9, 3, 2)
    assert local_values(m, "cr", bary).shape == (1, 6, 3, 2)
    with pytest.raises(ValueError):
        local_values(m, "p2", bary)


def test_dofmap_sizes_and_constraints(grids):
    m = grids(8)
    d = DofMap(m, BoundarySpec.pure_dirichlet())
    assert d.num_dofs == 370 and d.reported_ndof == 370
    assert d.num_free == 2 * 49 + (m.num_edges - 32)
    mixed = DofMap(m, mixed_right())
    # right side vertices other than the two corners are free
    assert mixed.num_free == d.num_free + 2 * 7 + 8
    cr = DofMap(m, BoundarySpec.pure_dirichlet(), "cr")
    assert cr.num_dofs == 2 * m.num_edges


def test_boundary_spec_unknown_label(grids):
    with pytest.raises(ValueError):
        DofMap(grids(2), BoundarySpec(("left",), {"rightt": lambda x, n: x}))


def test_unisolvence_of_p1rt0_on_a_cell():
    m = reference_triangle()
    # coefficient -> (vertex values, edge fluxes of the RT0 part) is injective
    d = DofMap(m)
    M = np.zeros((9, 9))
    for k in range(9):
        c = np.zeros(9)
        c[k] = 1.0
        u = d.function(c)
        M[:6, k] = u.vertex_values.ravel()
        M[6:, k] = edge_fluxes(u.rt_part())
    assert np.linalg.matrix_rank(M) == 9


def test_edge_fluxes_equal_rt_coefficients(grids, rng):
    d = DofMap(grids(3))
    u = d.random(rng, p1=False)
    assert np.allclose(edge_fluxes(u), u.edge_values, atol=1e-13)


def test_linear_fields_are_reproduced(rng):
    m = generate_perturbed_unit_square(4, seed=2)
    d = DofMap(m)
    A = rng.standard_normal((2, 2))
    b = rng.standard_normal(2)
    v = lambda x: x @ A.T + b
    u = interp_composite(d, v)
    assert np.allclose(u.edge_values, 0.0, atol=1e-13)
    bary = triangle_rule(2)[0]
    assert np.allclose(u.values_at(bary), v(m.map_to_cells(bary)), atol=1e-13)
    assert np.allclose(u.gradients_at(bary), A, atol=1e-12)


def test_rt_interpolant_reproduces_rt_fields():
    m = generate_perturbed_unit_square(4, seed=5)
    d = DofMap(m)
    v = lambda x: 0.3 * x + np.array([1.0, -2.0])
    u = interp_rt(d, v)
    bary = triangle_rule(2)[0]
    assert np.allclose(u.values_at(bary), v(m.map_to_cells(bary)), atol=1e-13)


def _poly_field(coef):
    # vector field with polynomial components of degree <= 3
    powers = [(a, b) for a in range(4) for b in range(4 - a)]

    def v(x):
        mono = np.stack([x[..., 0] ** a * x[..., 1] ** b for a, b in powers], axis=-1)
        return mono @ coef

    def div(x):
        out = 0.0
        for k, (a, b) in enumerate(powers):
            if a:
                out = out + coef[k, 0] * a * x[..., 0] ** (a - 1) * x[..., 1] ** b
            if b:
                out = out + coef[k, 1] * b * x[..., 0] ** a * x[..., 1] ** (b - 1)
        return out

    return v, div, len(powers)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_commuting_diagram(seed):
    rng = np.random.default_rng(seed)
    m = generate_perturbed_unit_square(3, seed=seed % 97)
    _, _, np_ = _poly_field(np.zeros((10, 2)))
    coef = rng.uniform(-1, 1, (np_, 2))
    v, div, _ = _poly_field(coef)
    d = DofMap(m)
    lhs = interp_composite(d, v).cell_divergence()
    rhs = project_p0(m, div)
    assert np.allclose(lhs, rhs, atol=1e-11, rtol=0)
    assert np.allclose(interp_rt(d, v).cell_divergence(), rhs, atol=1e-11, rtol=0)


def test_nodal_interpolation_order():
    v = lambda x: np.stack([np.sin(3 * x[:, 0]) * x[:, 1], np.cos(2 * x[:, 1])], axis=1)
    bary, w = triangle_rule(6)
    errs = []
    for n in (8, 16, 32):
        m = generate_structured_unit_square(n)
        u = interp_nodal(DofMap(m), v)
        diff = u.values_at(bary) - v(m.map_to_cells(bary).reshape(-1, 2)).reshape(-1, len(w), 2)
        errs.append(np.sqrt(np.sum(m.areas[:, None] * w * np.sum(diff ** 2, axis=2))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


def test_rt_flux_quadrature_exact_for_cubics():
    m = generate_structured_unit_square(2)
    v = lambda x: np.stack([x[:, 0] ** 3, x[:, 0] * x[:, 1] ** 2], axis=1)
    s = np.linspace(0, 1, 2001)
    for e in range(m.num_edges):
        pts = _edge_points(m, e, s)
        ref = np.trapezoid(v(pts) @ m.edge_normals[e], s)
        assert edge_mean_flux(m, v, [e])[0] == pytest.approx(ref, abs=1e-6)


def test_evaluate_matches_finite_differences(rng):
    m = generate_perturbed_unit_square(3, seed=7)
    for space in ("p1rt0", "br", "cr", "p1"):
        d = DofMap(m, space=space)
        u = d.function(rng.standard_normal(d.num_dofs))
        t = 4
        c = m.centroids[t]
        out = u.evaluate(t, c)
        h = 1e-6
        fd = np.stack([(u.evaluate(t, c + h * ek)["value"] - u.evaluate(t, c - h * ek)["value"])
                       / (2 * h) for ek in np.eye(2)], axis=1)
        assert np.allclose(out["gradient"], fd, atol=1e-6)
        assert out["divergence"] == pytest.approx(np.trace(fd), abs=1e-6)


def test_evaluate_outside_cell():
    m = reference_triangle()
    u = DofMap(m).zeros()
    with pytest.raises(ValueError):
        u.evaluate(0, [1.0, 1.0])


def test_local_edge_convention():
    assert LOCAL_EDGES.tolist() == [[1, 2], [2, 0], [0, 1]]
