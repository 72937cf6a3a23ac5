import numpy as np
import pytest
import scipy.linalg as sla

from p1rt0 import analysis
from p1rt0.assembly import SchemeConfig, assemble_full, assemble_scheme
from p1rt0.femspace import BoundarySpec, DofMap, interp_composite, mixed_right
from p1rt0.mesh import generate_perturbed_unit_square, generate_structured_unit_square


@pytest.fixture(scope="module")
def ms():
    return analysis.sine_solution(3.0, 0.5)


def test_example_vanishes_on_boundary(ms):
    t = np.linspace(0, 1, 7)
    edges = np.concatenate([np.stack([t, 0 * t], 1), np.stack([t, 0 * t + 1], 1),
                            np.stack([0 * t, t], 1), np.stack([0 * t + 1, t], 1)])
    assert np.abs(ms.u(edges)).max() < 1e-15


def test_gradient_by_finite_differences(ms):
    x = np.array([[0.3, 0.6], [0.71, 0.2]])
    h = 1e-6
    for k, ek in enumerate(np.eye(2)):
        fd = (ms.u(x + h * ek) - ms.u(x - h * ek)) / (2 * h)
        assert np.allclose(ms.grad(x)[:, :, k], fd, atol=1e-8)


def test_force_by_finite_differences(ms):
    x = np.array([[0.3, 0.6], [0.71, 0.2]])
    h = 1e-4

    def stress(p):
        return ms.stress(p)

    div = np.zeros((2, 2))
    for k, ek in enumerate(np.eye(2)):
        div += (stress(x + h * ek)[:, :, k] - stress(x - h * ek)[:, :, k]) / (2 * h)
    assert np.allclose(ms.f(x), -div, atol=1e-6)


def test_linear_solution_has_no_force():
    ls = analysis.linear_solution([[1.0, 2.0], [0.5, -1.0]], [0.1, 0.2], lam=4.0)
    x = np.random.default_rng(0).random((5, 2))
    assert np.allclose(ls.f(x), 0.0)
    assert np.allclose(ls.grad(x), [[1.0, 2.0], [0.5, -1.0]])


def test_gradient_force():
    x = np.array([[0.5, 0.1], [1.0, 0.7]])
    assert np.allclose(analysis.gradient_force(x), [[6 * 0.5 ** 5, 6 * 0.1 ** 5], [6.0, 6 * 0.7 ** 5]])


def test_rates_example():
    r = analysis.convergence_rates([4.16e-2, 1.08e-2])
    assert r[0] == pytest.approx(1.946, abs=1e-3)
    r = analysis.convergence_rates([1.0, 0.25], ndofs=[100, 400])
    assert r[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        analysis.convergence_rates([1.0])
    with pytest.raises(ValueError):
        analysis.convergence_rates([1.0, 0.0])


def test_linear_fields_are_solved_exactly():
    mesh = generate_perturbed_unit_square(4, seed=1)
    ls = analysis.linear_solution([[0.3, -0.2], [0.7, 0.1]], [1.0, 2.0], lam=50.0)
    bspec = mixed_right(ls.traction)
    for scheme in ("S2", "S3", "S4minus", "S4plus"):
        cfg = SchemeConfig(scheme, lam=50.0, mu=1.0, f=ls.f)
        A, b, d = assemble_full(cfg, mesh, bspec)
        exact = interp_composite(DofMap(mesh), ls.u).coefficients
        free = d.free_dofs
        r = b[free] - (A @ exact)[free]
        assert np.abs(r).max() < 1e-10


def test_errors_vanish_for_interpolated_linears():
    mesh = generate_perturbed_unit_square(3, seed=2)
    ls = analysis.linear_solution([[0.3, -0.2], [0.7, 0.1]], [1.0, 2.0])
    uh = interp_composite(DofMap(mesh), ls.u)
    assert analysis.error_l2(ls.u, uh) < 1e-13
    assert analysis.error_h1_broken(ls.grad, uh) < 1e-13


def test_norm_consistency(rng):
    mesh = generate_perturbed_unit_square(4, seed=3)
    d = DofMap(mesh, mixed_right())
    u = d.random(rng)
    base = analysis.norm_h(u, mixed=False)
    full = analysis.norm_h(u, mixed=True)
    assert full > base
    assert analysis.norm_h1(u, 0.0 + 1e-300, 0.5) == pytest.approx(base, rel=1e-12)
    r = u.rt_part()
    assert analysis.norm_R(r) == pytest.approx(analysis.norm_R(u))
    assert analysis.norm_R(u.p1_part()) == 0.0
    # the diagonal mass variant equals a0 for a single edge function
    c = np.zeros(d.num_dofs)
    c[d.edge_offset + 5] = 1.0
    one = d.function(c)
    assert analysis.norm_R(one, "aD") == pytest.approx(analysis.norm_R(one, "a0"), rel=1e-12)


def _divergence_free_basis(mesh):
    """Null space of the cellwise divergence on free S1 DOFs."""
    d = DofMap(mesh, BoundarySpec.pure_dirichlet())
    from p1rt0.femspace import local_divergences
    div = local_divergences(mesh, "p1rt0")
    B = np.zeros((mesh.num_cells, d.num_dofs))
    np.add.at(B, (np.repeat(np.arange(mesh.num_cells), 9), d.cell_dofs.ravel()), div.ravel())
    return d, sla.null_space(B[:, d.free_dofs])


@pytest.mark.parametrize("lam", [1.0, 1e6])
def test_gradient_force_orthogonal_to_divergence_free(lam):
    mesh = generate_structured_unit_square(4)
    cfg = SchemeConfig("S1", lam=lam, f=analysis.gradient_force)
    sys_ = assemble_scheme(cfg, mesh)
    b = sys_.rhs
    _, Z = _divergence_free_basis(mesh)
    assert Z.shape[1] > 0
    assert np.abs(Z.T @ b).max() < 1e-12 * np.abs(b).max()
    uh = sys_.solve()
    x = uh.coefficients[sys_.free_dofs]
    assert np.abs(Z.T @ (sys_.matrix @ x)).max() < 1e-8 * np.abs(b).max()


def test_solution_scales_with_inverse_lambda():
    mesh = generate_structured_unit_square(16)
    values = {}
    for lam in (1e4, 1e6):
        uh = assemble_scheme(SchemeConfig("S1", lam=lam, f=analysis.gradient_force), mesh).solve()
        values[lam] = analysis.broken_h1_seminorm(uh)
    assert values[1e4] / values[1e6] == pytest.approx(100.0, rel=0.01)


@pytest.fixture(scope="module")
def sample_family():
    def coherent(ms, mesh, bspec):
        """RT0 interpolant of the strain divergence, normalized."""
        d = DofMap(mesh, bspec)
        from p1rt0.femspace import interp_rt
        vh = interp_rt(d, lambda x: -ms.div_strain(x))
        return vh * (1.0 / analysis.norm_h(vh))
    return coherent


@pytest.mark.parametrize("scheme", ["S1", "S2", "S3", "S4minus"])
def test_consistency_forms_agree(scheme, sample_family):
    ms = analysis.sine_solution(2.0, 1.0)
    mesh = generate_structured_unit_square(8)
    bspec = BoundarySpec.pure_dirichlet() if scheme == "S1" else mixed_right(ms.traction)
    vh = sample_family(ms, mesh, bspec)
    rng = np.random.default_rng(4)
    vh = vh + DofMap(mesh, bspec).random(rng, rt=False) * 0.1
    r = analysis.consistency_residual(ms, vh, scheme)
    assert r["defining"] == pytest.approx(r["reduced"], rel=1e-8, abs=1e-12)


def test_consistency_vanishes_without_rt_part(rng):
    ms = analysis.sine_solution(2.0, 1.0)
    mesh = generate_structured_unit_square(8)
    d = DofMap(mesh, BoundarySpec.pure_dirichlet())
    r = analysis.consistency_residual(ms, d.random(rng, rt=False))
    assert abs(r["defining"]) < 1e-11 and r["reduced"] == 0.0


def test_consistency_decays_linearly(sample_family):
    ms = analysis.sine_solution(1.0, 1.0)
    vals = []
    for n in (8, 16, 32):
        mesh = generate_structured_unit_square(n)
        vh = sample_family(ms, mesh, BoundarySpec.pure_dirichlet())
        vals.append(abs(analysis.consistency_residual(ms, vh)["defining"]))
    rates = analysis.convergence_rates(vals)
    assert np.all(rates > 0.9)


def test_naive_keeps_boundary_term(sample_family):
    ms = analysis.sine_solution(1.0, 1.0)
    mesh = generate_structured_unit_square(8)
    bspec = mixed_right(ms.traction)
    vh = sample_family(ms, mesh, bspec)
    naive = analysis.consistency_residual(ms, vh, "NAIVE")
    s2 = analysis.consistency_residual(ms, vh, "S2")
    assert naive["defining"] == pytest.approx(naive["reduced"], rel=1e-8)
    assert abs(naive["defining"] - s2["defining"]) > 1e-3 * abs(s2["defining"])
