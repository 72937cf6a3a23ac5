"""Manufactured solutions, error norms, discrete norms and consistency residuals.

The discrete norms are evaluated from function values and cellwise
geometry, never from assembled matrices, so they serve as an independent
check of the assembly module.
"""
from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from .femspace import local_values
from .mesh import LOCAL_EDGES
from .quadrature import gauss_interval, triangle_rule

PI = np.pi


@dataclasses.dataclass(frozen=True)
class ManufacturedSolution:
    """Exact displacement with derived data; fields take ``(N, 2)`` points."""

    u: Callable
    grad: Callable               # (N, 2, 2), layout [comp, deriv]
    f: Callable                  # body force -div sigma(u)
    div_strain: Callable         # div eps(u), (N, 2)
    lam: float
    mu: float
    name: str = ""

    def divergence(self, x):
        g = self.grad(x)
        return g[:, 0, 0] + g[:, 1, 1]

    def strain(self, x):
        g = self.grad(x)
        return 0.5 * (g + np.swapaxes(g, 1, 2))

    def stress(self, x):
        s = 2.0 * self.mu * self.strain(x)
        d = self.divergence(x)
        s[:, 0, 0] += self.lam * d
        s[:, 1, 1] += self.lam * d
        return s

    def traction(self, x, n):
        """``sigma(u) n`` at points ``x`` with unit normals ``n``."""
        return np.einsum("nij,nj->ni", self.stress(x), np.asarray(n, dtype=float))


def sine_solution(lam=1.0, mu=1.0):
    """Trigonometric solution with a ``1 / (mu + lam)`` compressible part."""
    a = 1.0 / (mu + lam)

    def u(x):
        X, Y = x[:, 0], x[:, 1]
        s = np.sin(PI * X) * np.sin(PI * Y)
        return np.column_stack([
            np.sin(2 * PI * Y) * (np.cos(2 * PI * X) - 1.0) + a * s,
            np.sin(2 * PI * X) * (1.0 - np.cos(2 * PI * Y)) + a * s,
        ])

    def grad(x):
        X, Y = x[:, 0], x[:, 1]
        sx, cx = np.sin(2 * PI * X), np.cos(2 * PI * X)
        sy, cy = np.sin(2 * PI * Y), np.cos(2 * PI * Y)
        px = a * PI * np.cos(PI * X) * np.sin(PI * Y)
        py = a * PI * np.sin(PI * X) * np.cos(PI * Y)
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = -2 * PI * sx * sy + px
        g[:, 0, 1] = 2 * PI * cy * (cx - 1.0) + py
        g[:, 1, 0] = 2 * PI * cx * (1.0 - cy) + px
        g[:, 1, 1] = 2 * PI * sx * sy + py
        return g

    def laplacian(x):
        X, Y = x[:, 0], x[:, 1]
        s = np.sin(PI * X) * np.sin(PI * Y)
        sx, cx = np.sin(2 * PI * X), np.cos(2 * PI * X)
        sy, cy = np.sin(2 * PI * Y), np.cos(2 * PI * Y)
        return np.column_stack([
            -4 * PI ** 2 * sy * (2 * cx - 1.0) - 2 * a * PI ** 2 * s,
            -4 * PI ** 2 * sx * (1.0 - 2 * cy) - 2 * a * PI ** 2 * s,
        ])

    def grad_div(x):
        c = a * PI ** 2 * np.cos(PI * (x[:, 0] + x[:, 1]))
        return np.column_stack([c, c])

    def div_strain(x):
        return 0.5 * (laplacian(x) + grad_div(x))

    def f(x):
        return -mu * laplacian(x) - (mu + lam) * grad_div(x)

    return ManufacturedSolution(u, grad, f, div_strain, lam, mu, "sine_solution")


def gradient_force(x):
    """Gradient force ``grad(x^6 + y^6)``."""
    x = np.asarray(x, dtype=float)
    return 6.0 * x ** 5


def linear_solution(A, b=(0.0, 0.0), lam=1.0, mu=1.0):
    """``u = A x + b``; zero body force."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)

    def zero(x):
        return np.zeros((len(x), 2))

    return ManufacturedSolution(
        lambda x: x @ A.T + b,
        lambda x: np.broadcast_to(A, (len(x), 2, 2)).copy(),
        zero, zero, lam, mu, "linear")


# errors --------------------------------------------------------------------

def _eval(field, x):
    return np.asarray(field(x.reshape(-1, 2)), dtype=float)


def error_l2(exact, uh, degree=6):
    """``||u - u_h||`` by a degree-``degree`` rule."""
    mesh = uh.mesh
    bary, w = triangle_rule(degree)
    x = mesh.map_to_cells(bary)
    e = _eval(exact, x).reshape(x.shape) - uh.values_at(bary)
    return float(np.sqrt(np.einsum("q,tqk,tqk,t->", w, e, e, mesh.areas)))


def error_h1_broken(exact_grad, uh, degree=6, part="full"):
    """``||grad_h (u - u_h)||``; ``part="p1only"`` drops the RT0 gradient."""
    if part not in ("full", "p1only"):
        raise ValueError(f"unknown part {part!r}")
    mesh = uh.mesh
    bary, w = triangle_rule(degree)
    x = mesh.map_to_cells(bary)
    v = uh.p1_part() if part == "p1only" and uh.space == "p1rt0" else uh
    e = _eval(exact_grad, x).reshape(x.shape[:2] + (2, 2)) - v.gradients_at(bary)
    return float(np.sqrt(np.einsum("q,tqij,tqij,t->", w, e, e, mesh.areas)))


def broken_h1_seminorm(uh, part="full"):
    """``||grad_h u_h||`` (gradients are cellwise constant)."""
    v = uh.p1_part() if part == "p1only" and uh.space == "p1rt0" else uh
    g = v.gradients_at(np.full((1, 3), 1.0 / 3.0))[:, 0]
    return float(np.sqrt(np.einsum("tij,tij,t->", g, g, uh.mesh.areas)))


# discrete norms ------------------------------------------------------------

def _alpha(mesh, alpha):
    return np.broadcast_to(np.asarray(alpha, dtype=float), (mesh.num_cells,))


def _rt_mass_terms(uh):
    """Per cell and local edge ``||u_e psi_e||_T^2`` by the midpoint rule."""
    mesh = uh.mesh
    p = mesh.cell_points
    mids = 0.5 * (p[:, LOCAL_EDGES[:, 0]] + p[:, LOCAL_EDGES[:, 1]])   # (T, 3, 2)
    ue = uh.edge_values[mesh.cell_edges]
    c = mesh.cell_edge_signs * mesh.edge_lengths[mesh.cell_edges] / (2 * mesh.areas[:, None])
    d = mids[:, None, :, :] - p[:, :, None, :]                         # (T, m, q, 2)
    sq = np.einsum("tmqk,tmqk->tm", d, d) / 3.0
    return (c * ue) ** 2 * sq * mesh.areas[:, None]


def norm_R(uh, variant="adiv", alpha=1.0):
    mesh = uh.mesh
    a = _alpha(mesh, alpha)
    if variant == "adiv":
        ue = uh.edge_values[mesh.cell_edges]
        # |div(u_e psi_e)|^2 |T| = u_e^2 |e|^2 / |T|
        terms = ue ** 2 * mesh.edge_lengths[mesh.cell_edges] ** 2 / mesh.areas[:, None]
        return float(np.sqrt(np.sum(a[:, None] * terms)))
    scale = a / mesh.cell_diameters ** 2
    if variant == "aD":
        return float(np.sqrt(np.sum(scale[:, None] * _rt_mass_terms(uh))))
    if variant == "a0":
        bary, w = triangle_rule(2)
        v = uh.rt_part().values_at(bary)
        return float(np.sqrt(np.einsum("t,q,tqk,tqk,t->", scale, w, v, v, mesh.areas)))
    raise ValueError(f"unknown a^R variant {variant!r}")


def _strain_energy(uh):
    eps = uh.cell_strain()
    return float(np.einsum("tij,tij,t->", eps, eps, uh.mesh.areas))


def _neumann_strain(uh):
    mesh = uh.mesh
    edges = uh.dofmap.neumann_edges
    if len(edges) == 0:
        return 0.0
    eps = uh.cell_strain()[mesh.edge_cells[edges, 0]]
    le = mesh.edge_lengths[edges]
    return float(np.sum(le * le * np.einsum("eij,eij->e", eps, eps)))


def norm_h(uh, variant="adiv", alpha=1.0, mixed=None):
    """``a(v^1, v^1) + a^R(v^R, v^R)`` (+ the Neumann edge term if mixed)."""
    if mixed is None:
        mixed = len(uh.dofmap.neumann_edges) > 0
    total = _strain_energy(uh) + norm_R(uh, variant, alpha) ** 2
    if mixed:
        total += _neumann_strain(uh)
    return float(np.sqrt(total))


def _div_sq(uh):
    d = uh.cell_divergence()
    return float(np.sum(d * d * uh.mesh.areas))


def norm_h1(uh, lam, mu, variant="adiv", alpha=1.0):
    return float(np.sqrt(2 * mu * norm_h(uh, variant, alpha, mixed=False) ** 2
                         + lam * _div_sq(uh)))


def norm_h2(uh, lam, mu, variant="adiv", alpha=1.0):
    return float(np.sqrt(2 * mu * norm_h(uh, variant, alpha, mixed=True) ** 2
                         + lam * _div_sq(uh)))


# consistency ---------------------------------------------------------------

def _boundary_geometry(mesh, edges, npoints):
    cells = mesh.edge_cells[edges, 0]
    local = np.argmax(mesh.cell_edges[cells] == edges[:, None], axis=1)
    s, w = gauss_interval(npoints)
    i, j = LOCAL_EDGES[local, 0], LOCAL_EDGES[local, 1]
    bary = np.zeros((len(edges), len(s), 3))
    rows = np.arange(len(edges))
    bary[rows, :, i] = 1.0 - s
    bary[rows, :, j] = s
    x = np.einsum("eqi,eik->eqk", bary, mesh.cell_points[cells])
    n = mesh.outward_normals[cells, local]
    return cells, local, bary, x, n, w


def _values_on_edges(vh, cells, bary):
    """Values of ``vh`` at per-edge barycentric points of their cells."""
    out = np.empty(bary.shape[:2] + (2,))
    coef = vh.local_coefficients()[cells]
    # edge points share their pattern per local edge index
    key = np.argmin(bary[:, 0, :] + bary[:, -1, :], axis=1)
    for m in np.unique(key):
        sel = key == m
        phi = local_values(vh.mesh, vh.space, bary[np.flatnonzero(sel)[0]])[cells[sel]]
        out[sel] = np.einsum("el,elqk->eqk", coef[sel], phi)
    return out


def consistency_residual(ms, vh, scheme="S1", degree=12, edge_points=6):
    """Residual of the exact solution in the discrete form.

    Returns ``{"defining": (f, v) + F_N(v) - a(u, v), "reduced": ...}``; the
    reduced form is ``(-2 mu div eps(u), v^R)`` plus, for ``NAIVE``, the
    boundary term ``int 2 mu eps(u) n . v^R`` the naive scheme omits.
    """
    mesh = vh.mesh
    mu, lam = ms.mu, ms.lam
    bary, w = triangle_rule(degree)
    x = mesh.map_to_cells(bary)
    pts = x.reshape(-1, 2)
    shape = x.shape[:2]
    wa = w[None, :] * mesh.areas[:, None]

    v = vh.values_at(bary)
    v1 = vh.p1_part()
    eps_v1 = v1.cell_strain()
    div_v = vh.cell_divergence()

    f = _eval(ms.f, x).reshape(x.shape)
    eps_u = ms.strain(pts).reshape(shape + (2, 2))
    div_u = ms.divergence(pts).reshape(shape)

    fv = np.einsum("tq,tqk,tqk->", wa, f, v)
    a_eps = np.einsum("tq,tqij,tij->", wa, eps_u, eps_v1)
    a_div = np.einsum("tq,tq,t->", wa, div_u, div_v)
    defining = fv - 2 * mu * a_eps - lam * a_div

    vR = vh.rt_part()
    reduced = np.einsum("tq,tqk,tqk->", wa,
                        -2 * mu * _eval(ms.div_strain, x).reshape(x.shape),
                        vR.values_at(bary))

    edges = vh.dofmap.neumann_edges
    if scheme != "S1" and len(edges):
        cells, local, eb, ex, n, ew = _boundary_geometry(mesh, edges, edge_points)
        le = mesh.edge_lengths[edges]
        ep = ex.reshape(-1, 2)
        nn = np.repeat(n, len(ew), axis=0)
        g = ms.traction(ep, nn).reshape(ex.shape)
        epsn = np.einsum("nij,nj->ni", ms.strain(ep), nn).reshape(ex.shape)
        vb = _values_on_edges(vh, cells, eb)
        vRb = _values_on_edges(vR, cells, eb)
        v1b = vb - vRb
        wl = ew[None, :] * le[:, None]
        if scheme in ("S4plus", "S4minus"):
            gn = np.einsum("eqk,ek->eq", g, n)
            vRn = np.einsum("eqk,ek->eq", vRb, n)
            nen = np.einsum("eqk,ek->eq", epsn, n)
            defining += np.einsum("eq,eqk,eqk->", wl, g, v1b)
            defining += np.einsum("eq,eq,eq->", wl, gn - 2 * mu * nen, vRn)
        else:
            defining += np.einsum("eq,eqk,eqk->", wl, g, vb)
            if scheme in ("S2", "S3"):
                defining -= 2 * mu * np.einsum("eq,eqk,eqk->", wl, epsn, vRb)
            elif scheme == "NAIVE":
                reduced += 2 * mu * np.einsum("eq,eqk,eqk->", wl, epsn, vRb)
    return {"defining": float(defining), "reduced": float(reduced)}


# rates ---------------------------------------------------------------------

def convergence_rates(errors, ndofs=None):
    """Observed orders; ``log2`` ratios, or per ``sqrt(ndof)`` when given."""
    e = np.asarray(errors, dtype=float)
    if len(e) < 2:
        raise ValueError("need at least two errors")
    if np.any(~(e > 0)):
        raise ValueError("errors must be positive")
    r = np.log(e[:-1] / e[1:])
    if ndofs is None:
        return r / np.log(2.0)
    n = np.asarray(ndofs, dtype=float)
    if len(n) != len(e):
        raise ValueError("errors and ndofs differ in length")
    return r / np.log(np.sqrt(n[1:] / n[:-1]))
