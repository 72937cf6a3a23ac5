"""Global linear systems for the P1+RT0 schemes and the P1/BR/CR baselines.

Every block is assembled cellwise into dense local arrays and scattered
into a global COO matrix in one shot; Dirichlet DOFs are removed by
slicing rows and columns, which keeps symmetric schemes exactly symmetric.
"""
from __future__ import annotations

import dataclasses
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import linalg
from .femspace import (BoundarySpec, DofMap, FeFunction, local_divergences,
                       local_gradients, local_values)
from .mesh import LOCAL_EDGES
from .quadrature import gauss_interval, triangle_rule

SCHEMES = ("S1", "S2", "S3", "S4plus", "S4minus", "NAIVE", "P1", "BR", "CR")
AR_VARIANTS = ("a0", "aD", "adiv")
MIXED_SCHEMES = ("S2", "S3", "S4plus", "S4minus", "NAIVE")
SPACE_OF = {"P1": "p1", "BR": "br", "CR": "cr"}

_CENTROID = np.full((1, 3), 1.0 / 3.0)


def _zero_force(x):
    return np.zeros_like(x)


@dataclasses.dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "S1"
    ar_variant: str = "adiv"
    alpha: object = 1.0          # scalar or per-cell array
    lam: float = 1.0
    mu: float = 1.0
    f: Optional[Callable] = None

    @property
    def space(self):
        return SPACE_OF.get(self.scheme, "p1rt0")

    def force(self):
        return _zero_force if self.f is None else self.f

    def alpha_cells(self, mesh):
        a = np.broadcast_to(np.asarray(self.alpha, dtype=float), (mesh.num_cells,))
        return np.array(a)

    def validate(self, mesh=None, bspec=None):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.ar_variant not in AR_VARIANTS:
            raise ValueError(f"unknown a^R variant {self.ar_variant!r}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError("lambda must be positive")
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ValueError("mu must be positive")
        if mesh is not None:
            a = self.alpha_cells(mesh)
            if np.any(~(a > 0)):
                raise ValueError("alpha must be positive on every cell")
        if bspec is not None:
            if self.scheme in MIXED_SCHEMES and bspec.is_pure_dirichlet:
                raise ValueError(f"{self.scheme} needs a Neumann boundary")
            if self.scheme in ("S1", "CR") and not bspec.is_pure_dirichlet:
                raise ValueError(f"{self.scheme} is a pure displacement scheme")


@dataclasses.dataclass(frozen=True)
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free_dofs: np.ndarray
    dofmap: DofMap
    symmetric: bool

    @property
    def size(self):
        return self.matrix.shape[0]

    def expand(self, x):
        c = np.zeros(self.dofmap.num_dofs, dtype=np.result_type(x, float))
        c[self.free_dofs] = x
        return c

    def solve(self, method="direct", **kw):
        if method == "direct":
            x = linalg.solve_direct(self.matrix, self.rhs, symmetric=self.symmetric, **kw)
        elif method == "cg":
            x = linalg.solve_cg(self.matrix, self.rhs, **kw)
        else:
            raise ValueError(f"unknown solve method {method!r}")
        return FeFunction(self.dofmap, self.expand(x).astype(float))


# scatter helpers -----------------------------------------------------------

def _scatter(n, rows, cols, vals):
    rows = np.broadcast_to(rows, vals.shape).ravel()
    cols = np.broadcast_to(cols, vals.shape).ravel()
    return sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _scatter_cells(dofmap, local, sel=None):
    """Add ``(T, nl, nl)`` local matrices over the columns ``sel`` of cell_dofs."""
    d = dofmap.cell_dofs if sel is None else dofmap.cell_dofs[:, sel]
    return _scatter(dofmap.num_dofs, d[:, :, None], d[:, None, :], local)


def _strain(grad):
    return 0.5 * (grad + np.swapaxes(grad, -1, -2))


# blocks --------------------------------------------------------------------

def local_epsilon(mesh, space):
    """Local ``(eps(phi_i), eps(phi_j))_T`` for the displacement part."""
    if space == "br":
        bary, w = triangle_rule(2)          # bubble strains are linear
        eps = _strain(local_gradients(mesh, "br", bary))
    else:
        bary, w = _CENTROID, np.ones(1)
        eps = _strain(local_gradients(mesh, "p1", bary))
    K = np.einsum("q,tiqab,tjqab->tij", w, eps, eps)
    return K * mesh.areas[:, None, None]


def assemble_epsilon(dofmap, mu):
    """``2 mu (eps(u^1), eps(v^1))`` over the P1 (and bubble) DOFs."""
    mesh = dofmap.mesh
    if dofmap.space == "cr":
        raise ValueError("CR uses the broken gradient form")
    K = 2.0 * mu * local_epsilon(mesh, dofmap.space)
    return _scatter_cells(dofmap, K, np.arange(K.shape[1]))


def local_rt_mass(mesh):
    """Exact RT0 mass matrices ``(psi_i, psi_j)_T``, ``(T, 3, 3)``."""
    bary, w = triangle_rule(2)
    psi = local_values(mesh, "p1rt0", bary)[:, 6:]
    return np.einsum("q,tiqk,tjqk->tij", w, psi, psi) * mesh.areas[:, None, None]


def local_ar(mesh, variant, alpha):
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (mesh.num_cells,))
    if variant == "adiv":
        lengths = mesh.edge_lengths[mesh.cell_edges]
        d = alpha[:, None] * lengths ** 2 / mesh.areas[:, None]
        return d[:, :, None] * np.eye(3)
    if variant not in ("a0", "aD"):
        raise ValueError(f"unknown a^R variant {variant!r}")
    M = local_rt_mass(mesh) * (alpha / mesh.cell_diameters ** 2)[:, None, None]
    if variant == "aD":
        M = np.einsum("tii->ti", M)[:, :, None] * np.eye(3)
    return M


def assemble_aR(dofmap, variant="adiv", alpha=1.0, mu=None):
    """Stabilization over RT0 DOFs; scaled by ``2 mu`` when ``mu`` is given."""
    if dofmap.space != "p1rt0":
        raise ValueError("a^R lives on the RT0 part of a p1rt0 space")
    K = local_ar(dofmap.mesh, variant, alpha)
    if mu is not None:
        K = 2.0 * mu * K
    return _scatter_cells(dofmap, K, np.arange(6, 9))


def assemble_divdiv(dofmap, lam):
    """``lam |T| div_i div_j`` (cell mean divergence for BR)."""
    mesh = dofmap.mesh
    d = local_divergences(mesh, dofmap.space)
    K = lam * mesh.areas[:, None, None] * d[:, :, None] * d[:, None, :]
    return _scatter_cells(dofmap, K)


def assemble_broken_gradient(dofmap, mu):
    """``mu (grad_h u, grad_h v)`` for the CR space."""
    mesh = dofmap.mesh
    g = local_gradients(mesh, "cr", _CENTROID)[:, :, 0]
    K = mu * np.einsum("tiab,tjab->tij", g, g) * mesh.areas[:, None, None]
    return _scatter_cells(dofmap, K)


# boundary geometry ---------------------------------------------------------

def _boundary_cells(mesh, edges):
    """Adjacent cell and local edge index for boundary ``edges``."""
    cells = mesh.edge_cells[edges, 0]
    local = np.argmax(mesh.cell_edges[cells] == edges[:, None], axis=1)
    return cells, local


def _edge_bary(local, s):
    """Barycentric coordinates ``(E, nq, 3)`` of points ``s`` on local edges."""
    bary = np.zeros((len(local), len(s), 3))
    i, j = LOCAL_EDGES[local, 0], LOCAL_EDGES[local, 1]
    rows = np.arange(len(local))
    bary[rows, :, i] = 1.0 - s
    bary[rows, :, j] = s
    return bary


def _boundary_values(mesh, space, cells, local, s):
    """Local basis values of boundary cells at edge points, ``(E, nloc, nq, 2)``."""
    out = None
    for m in range(3):
        sel = local == m
        if not np.any(sel):
            continue
        vals = local_values(mesh, space, _edge_bary(np.array([m]), s)[0])[cells[sel]]
        if out is None:
            out = np.zeros((len(cells),) + vals.shape[1:])
        out[sel] = vals
    return out


def _boundary_points(mesh, cells, local, s):
    bary = _edge_bary(local, s)
    return np.einsum("eqi,eik->eqk", bary, mesh.cell_points[cells])


def neumann_coupling_blocks(dofmap, scheme, mu):
    """Local coupling ``K[e, r, a]`` with rows on RT0 and columns on P1 DOFs.

    ``S2``/``S3``: ``2 mu int_e (eps(phi_a) n) . psi_r``, by 2-point Gauss.
    ``S4``: ``2 mu (n . eps(phi_a) n) (psi_r . n) |e|``; only the RT0 function of
    the boundary edge has a nonzero normal trace.
    """
    mesh = dofmap.mesh
    edges = dofmap.neumann_edges
    cells, local = _boundary_cells(mesh, edges)
    n = mesh.outward_normals[cells, local]                               # (E, 2)
    length = mesh.edge_lengths[edges]
    eps = _strain(local_gradients(mesh, "p1", _CENTROID)[cells, :, 0])   # (E, 6, 2, 2)
    epsn = np.einsum("eakl,el->eak", eps, n)                             # (E, 6, 2)
    if scheme in ("S2", "S3"):
        s, w = gauss_interval(2)
        psi = _boundary_values(mesh, "p1rt0", cells, local, s)[:, 6:]    # (E, 3, nq, 2)
        K = np.einsum("q,erqk,eak->era", w, psi, epsn)
    else:
        K = np.zeros((len(edges), 3, 6))
        sigma = mesh.cell_edge_signs[cells, local]
        K[np.arange(len(edges)), local] = sigma[:, None] * np.einsum("eak,ek->ea", epsn, n)
    K *= 2.0 * mu * length[:, None, None]
    rows = dofmap.cell_dofs[cells][:, 6:]
    cols = dofmap.cell_dofs[cells][:, :6]
    return K, rows, cols


def assemble_neumann_coupling(dofmap, scheme, mu):
    """Boundary coupling matrix for S2/S3/S4 (NAIVE adds nothing)."""
    if dofmap.bspec is None or dofmap.bspec.is_pure_dirichlet:
        raise ValueError("Neumann coupling needs a mixed boundary condition")
    N = dofmap.num_dofs
    if scheme == "NAIVE" or len(dofmap.neumann_edges) == 0:
        return sp.csr_matrix((N, N))
    if scheme not in ("S2", "S3", "S4plus", "S4minus"):
        raise ValueError(f"scheme {scheme!r} has no Neumann coupling")
    K, rows, cols = neumann_coupling_blocks(dofmap, scheme, mu)
    C = _scatter(N, rows[:, :, None], cols[:, None, :], K)
    if scheme in ("S2", "S4minus"):
        return C - C.T
    return C + C.T


# load vectors --------------------------------------------------------------

def _vector_field(f, x):
    return np.asarray(f(x.reshape(-1, 2)), dtype=float).reshape(x.shape)


def _volume_load(dofmap, f, space=None, degree=6):
    mesh = dofmap.mesh
    bary, w = triangle_rule(degree)
    fx = _vector_field(f, mesh.map_to_cells(bary))                      # (T, nq, 2)
    phi = local_values(mesh, space or dofmap.space, bary)
    return np.einsum("q,tqk,tlqk->tl", w, fx, phi) * mesh.areas[:, None]


def _cr_load(dofmap, f, degree=6):
    """``(f, PiR v)``: the CR DOF (e, k) reconstructs to ``n_e[k] psi_e``."""
    mesh = dofmap.mesh
    bary, w = triangle_rule(degree)
    fx = _vector_field(f, mesh.map_to_cells(bary))
    psi = local_values(mesh, "p1rt0", bary)[:, 6:]
    fpsi = np.einsum("q,tqk,tmqk->tm", w, fx, psi) * mesh.areas[:, None]
    flux = np.bincount(mesh.cell_edges.ravel(), fpsi.ravel(), minlength=mesh.num_edges)
    b = np.zeros(dofmap.num_dofs)
    b[0::2] = flux * mesh.edge_normals[:, 0]
    b[1::2] = flux * mesh.edge_normals[:, 1]
    return b


def _neumann_load(dofmap, scheme, npoints=3):
    mesh = dofmap.mesh
    bspec = dofmap.bspec
    b = np.zeros(dofmap.num_dofs)
    edges = dofmap.neumann_edges
    if bspec is None or len(edges) == 0 or not bspec.traction:
        return b
    cells, local = _boundary_cells(mesh, edges)
    s, w = gauss_interval(npoints)
    x = _boundary_points(mesh, cells, local, s)                          # (E, nq, 2)
    n = mesh.outward_normals[cells, local]
    g = bspec.traction_at(mesh, edges, x, n)
    length = mesh.edge_lengths[edges]
    space = dofmap.space
    phi = _boundary_values(mesh, space, cells, local, s)
    dofs = dofmap.cell_dofs[cells]
    if scheme in ("S4plus", "S4minus"):
        # g against v^1, normal part only against v^R
        loc = np.einsum("q,eqk,elqk->el", w, g, phi[:, :6]) * length[:, None]
        np.add.at(b, dofs[:, :6].ravel(), loc.ravel())
        sigma = mesh.cell_edge_signs[cells, local]
        gn = np.einsum("q,eqk,ek->e", w, g, n)
        np.add.at(b, dofs[np.arange(len(edges)), 6 + local], sigma * gn * length)
        return b
    loc = np.einsum("q,eqk,elqk->el", w, g, phi) * length[:, None]
    np.add.at(b, dofs.ravel(), loc.ravel())
    return b


def assemble_load(dofmap, f, scheme="S1", degree=6):
    """Right-hand side: volume force plus the scheme's traction term."""
    f = _zero_force if f is None else f
    if scheme == "CR":
        return _cr_load(dofmap, f, degree)
    loc = _volume_load(dofmap, f, degree=degree)
    b = np.zeros(dofmap.num_dofs)
    np.add.at(b, dofmap.cell_dofs.ravel(), loc.ravel())
    if scheme not in ("S1",):
        b += _neumann_load(dofmap, scheme)
    return b


# schemes -------------------------------------------------------------------

def assemble_full(config, mesh, bspec=None, check=True):
    """Unreduced matrix, load and DofMap of a scheme (all DOFs kept)."""
    bspec = BoundarySpec.pure_dirichlet() if bspec is None else bspec
    config.validate(mesh, bspec if check else None)
    dofmap = DofMap(mesh, bspec, config.space)
    s, lam, mu = config.scheme, config.lam, config.mu
    if s == "CR":
        A = assemble_broken_gradient(dofmap, mu) + assemble_divdiv(dofmap, mu + lam)
    else:
        A = assemble_epsilon(dofmap, mu) + assemble_divdiv(dofmap, lam)
        if config.space == "p1rt0":
            A = A + assemble_aR(dofmap, config.ar_variant, config.alpha_cells(mesh), mu)
        if s in MIXED_SCHEMES and not bspec.is_pure_dirichlet:
            A = A + assemble_neumann_coupling(dofmap, s, mu)
    b = assemble_load(dofmap, config.force(), s)
    return linalg.finalize_csr(A), b, dofmap


def assemble_scheme(config, mesh, bspec=None, check=True):
    """Linear system over free DOFs; ``check=False`` skips BC pairing rules."""
    A, b, dofmap = assemble_full(config, mesh, bspec, check)
    free = dofmap.free_dofs
    Af = linalg.finalize_csr(A[free][:, free])
    symmetric = config.scheme not in ("S2", "S4minus")
    return LinearSystem(Af, b[free], free, dofmap, symmetric)


def solve_scheme(config, mesh, bspec=None, **kw):
    return assemble_scheme(config, mesh, bspec).solve(**kw)
