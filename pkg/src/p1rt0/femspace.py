"""Finite element spaces on a :class:`~p1rt0.mesh.Triangulation`.

Four vector-valued spaces share one interface:

``p1rt0``
    continuous P1 plus lowest-order Raviart-Thomas. Global DOFs are
    ``2*v + k`` for the P1 component ``k`` at vertex ``v`` followed by one
    flux per edge at ``2*V + e``.
``p1``
    continuous P1 only.
``br``
    P1 enriched with normal edge bubbles ``lambda_i lambda_j n_e``
    (Bernardi-Raugel), numbered like ``p1rt0``.
``cr``
    nonconforming Crouzeix-Raviart, DOF ``2*e + k`` at edge midpoints.

The RT0 basis function of edge ``e`` restricted to a cell ``T`` is
``sigma * |e| / (2|T|) * (x - p)`` with ``p`` the vertex opposite ``e``; its
normal trace on ``e`` with respect to the global edge normal is one.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .mesh import LOCAL_EDGES
from .quadrature import gauss_interval, triangle_rule

SPACES = ("p1rt0", "p1", "br", "cr")


@dataclasses.dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet / Neumann split of the boundary.

    ``dirichlet`` holds boundary labels with ``u = 0``; the string ``"*"``
    marks the whole boundary. Every other boundary edge is Neumann with
    traction ``traction[label](x, n)`` (missing labels mean zero traction).
    """

    dirichlet: tuple = ("*",)
    traction: dict = dataclasses.field(default_factory=dict)

    @classmethod
    def pure_dirichlet(cls):
        return cls(("*",))

    @property
    def is_pure_dirichlet(self):
        return "*" in self.dirichlet

    def dirichlet_edges(self, mesh):
        b = mesh.boundary_edges
        if self.is_pure_dirichlet:
            return b
        return b[np.isin(mesh.edge_labels[b], list(self.dirichlet))]

    def neumann_edges(self, mesh):
        b = mesh.boundary_edges
        if self.is_pure_dirichlet:
            return b[:0]
        return b[~np.isin(mesh.edge_labels[b], list(self.dirichlet))]

    def dirichlet_vertices(self, mesh):
        return np.unique(mesh.edges[self.dirichlet_edges(mesh)])

    def validate(self, mesh):
        if len(self.dirichlet_edges(mesh)) == 0:
            raise ValueError("the Dirichlet boundary must be nonempty")
        unknown = set(self.traction) - set(mesh.edge_labels[mesh.boundary_edges])
        if unknown:
            raise ValueError(f"traction given for unknown labels {sorted(unknown)}")

    def traction_at(self, mesh, edges, x, n):
        """Traction values at points ``x`` (edges, nq, 2) with normals ``n``."""
        out = np.zeros_like(x)
        labels = mesh.edge_labels[edges]
        for label, g in self.traction.items():
            sel = labels == label
            if np.any(sel):
                xs = x[sel].reshape(-1, 2)
                ns = np.broadcast_to(n[sel][:, None, :], x[sel].shape).reshape(-1, 2)
                out[sel] = np.asarray(g(xs, ns), dtype=float).reshape(x[sel].shape)
        return out


def mixed_right(traction=None):
    """Neumann on the right side (x = 1), Dirichlet on the other three."""
    return BoundarySpec(("left", "bottom", "top"),
                        {} if traction is None else {"right": traction})


# local bases ---------------------------------------------------------------

def _rt_scale(mesh):
    """``sigma |e| / (2|T|)`` per cell and local edge."""
    lengths = mesh.edge_lengths[mesh.cell_edges]
    return mesh.cell_edge_signs * lengths / (2.0 * mesh.areas[:, None])


def _p1_values(bary):
    """Local P1 vector basis values, ``(6, nq, 2)``."""
    nq = len(bary)
    out = np.zeros((6, nq, 2))
    for i in range(3):
        for k in range(2):
            out[2 * i + k, :, k] = bary[:, i]
    return out


def _p1_gradients(mesh):
    """Constant gradients of the P1 vector basis, ``(T, 6, 2, 2)``."""
    g = mesh.barycentric_gradients
    out = np.zeros((mesh.num_cells, 6, 2, 2))
    for i in range(3):
        for k in range(2):
            out[:, 2 * i + k, k, :] = g[:, i]
    return out


def _rt_values(mesh, bary):
    """RT0 basis values ``(T, 3, nq, 2)``."""
    x = mesh.map_to_cells(bary)                       # (T, nq, 2)
    p = mesh.cell_points                              # (T, 3, 2)
    c = _rt_scale(mesh)
    return c[:, :, None, None] * (x[:, None] - p[:, :, None])


def _bubble_values(mesh, bary):
    """BR bubble values ``(T, 3, nq, 2)``."""
    e = LOCAL_EDGES
    b = bary[:, e[:, 0]] * bary[:, e[:, 1]]          # (nq, 3)
    n = mesh.edge_normals[mesh.cell_edges]            # (T, 3, 2)
    return b.T[None, :, :, None] * n[:, :, None, :]


def _bubble_gradients(mesh, bary):
    """BR bubble gradients ``(T, 3, nq, 2, 2)``."""
    e = LOCAL_EDGES
    g = mesh.barycentric_gradients                    # (T, 3, 2)
    gi = g[:, e[:, 0]]                                # (T, 3, 2)
    gj = g[:, e[:, 1]]
    li = bary[:, e[:, 0]].T                           # (3, nq)
    lj = bary[:, e[:, 1]].T
    grad = (lj[None, :, :, None] * gi[:, :, None, :]
            + li[None, :, :, None] * gj[:, :, None, :])
    n = mesh.edge_normals[mesh.cell_edges]
    return n[:, :, None, :, None] * grad[:, :, :, None, :]


def _cr_values(bary):
    nq = len(bary)
    out = np.zeros((6, nq, 2))
    for m in range(3):
        for k in range(2):
            out[2 * m + k, :, k] = 1.0 - 2.0 * bary[:, m]
    return out


def _cr_gradients(mesh):
    g = mesh.barycentric_gradients
    out = np.zeros((mesh.num_cells, 6, 2, 2))
    for m in range(3):
        for k in range(2):
            out[:, 2 * m + k, k, :] = -2.0 * g[:, m]
    return out


def local_values(mesh, space, bary):
    """Local basis values of ``space`` at barycentric points, ``(T, nloc, nq, 2)``."""
    bary = np.asarray(bary, dtype=float)
    T = mesh.num_cells
    if space == "cr":
        return np.broadcast_to(_cr_values(bary), (T, 6, len(bary), 2))
    p1 = np.broadcast_to(_p1_values(bary), (T, 6, len(bary), 2))
    if space == "p1":
        return p1
    if space == "p1rt0":
        return np.concatenate([p1, _rt_values(mesh, bary)], axis=1)
    if space == "br":
        return np.concatenate([p1, _bubble_values(mesh, bary)], axis=1)
    raise ValueError(f"unknown space {space!r}")


def local_gradients(mesh, space, bary):
    """Local basis gradients ``(T, nloc, nq, 2, 2)``; ``[..., comp, deriv]``."""
    bary = np.asarray(bary, dtype=float)
    nq = len(bary)
    if space == "cr":
        g = _cr_gradients(mesh)
        return np.broadcast_to(g[:, :, None], (g.shape[0], 6, nq, 2, 2))
    p1 = _p1_gradients(mesh)
    p1 = np.broadcast_to(p1[:, :, None], (p1.shape[0], 6, nq, 2, 2))
    if space == "p1":
        return p1
    if space == "p1rt0":
        c = _rt_scale(mesh)
        rt = c[:, :, None, None, None] * np.eye(2)
        rt = np.broadcast_to(rt, (mesh.num_cells, 3, nq, 2, 2))
        return np.concatenate([p1, rt], axis=1)
    if space == "br":
        return np.concatenate([p1, _bubble_gradients(mesh, bary)], axis=1)
    raise ValueError(f"unknown space {space!r}")


def local_divergences(mesh, space):
    """Cellwise constant divergences ``(T, nloc)`` (mean divergence for ``br``)."""
    g = mesh.barycentric_gradients
    p1 = g.reshape(mesh.num_cells, 6)                 # d lambda_i / d x_k
    if space == "p1":
        return p1
    if space == "p1rt0":
        return np.concatenate([p1, 2.0 * _rt_scale(mesh)], axis=1)
    if space == "br":
        # mean over T of div(lambda_i lambda_j n_e) = sigma |e| / (6 |T|)
        lengths = mesh.edge_lengths[mesh.cell_edges]
        pdiv = mesh.cell_edge_signs * lengths / (6.0 * mesh.areas[:, None])
        return np.concatenate([p1, pdiv], axis=1)
    if space == "cr":
        return (-2.0 * g).reshape(mesh.num_cells, 6)
    raise ValueError(f"unknown space {space!r}")


# single-cell basis functions -----------------------------------------------

def _local_edge(mesh, cell, edge):
    hits = np.flatnonzero(mesh.cell_edges[cell] == edge)
    if len(hits) == 0:
        raise ValueError(f"edge {edge} is not an edge of cell {cell}")
    return int(hits[0])


def rt0_basis(mesh, cell, edge):
    """RT0 basis of global ``edge`` on ``cell``: ``(value(x), divergence)``."""
    cell = int(cell)
    m = _local_edge(mesh, cell, int(edge))
    c = _rt_scale(mesh)[cell, m]
    p = mesh.cell_points[cell, m].copy()

    def value(x):
        return c * (np.asarray(x, dtype=float) - p)

    return value, 2.0 * c


def p1_basis(mesh, cell, vertex):
    """Barycentric hat of local ``vertex``: ``(value(x), gradient)``."""
    cell, vertex = int(cell), int(vertex)
    if not 0 <= vertex < 3:
        raise IndexError("local vertex index must be 0, 1 or 2")
    grad = mesh.barycentric_gradients[cell, vertex].copy()
    p = mesh.cell_points[cell, (vertex + 1) % 3].copy()

    def value(x):
        # lambda vanishes on the opposite edge, which passes through p
        return (np.asarray(x, dtype=float) - p) @ grad

    return value, grad


def cr_basis(mesh, cell, edge):
    """Nonconforming hat ``1 - 2 lambda_m`` of local ``edge`` m."""
    cell, edge = int(cell), int(edge)
    if not 0 <= edge < 3:
        raise IndexError("local edge index must be 0, 1 or 2")
    hat, grad = p1_basis(mesh, cell, edge)

    def value(x):
        return 1.0 - 2.0 * hat(x)

    return value, -2.0 * grad


def br_bubble(mesh, cell, edge):
    """Vector bubble ``lambda_i lambda_j n_e`` for local ``edge`` = {i, j}."""
    cell, edge = int(cell), int(edge)
    if not 0 <= edge < 3:
        raise IndexError("local edge index must be 0, 1 or 2")
    i, j = LOCAL_EDGES[edge]
    li, _ = p1_basis(mesh, cell, i)
    lj, _ = p1_basis(mesh, cell, j)
    n = mesh.edge_normals[mesh.cell_edges[cell, edge]].copy()

    def value(x):
        lam = np.asarray(li(x) * lj(x))
        return lam[..., None] * n

    return value


# DOF maps ----------------------------------------------------------------

class DofMap:
    """Global DOF numbering and boundary constraints for one space.

    ``bspec=None`` leaves every DOF free (useful for interpolation checks).
    """

    def __init__(self, mesh, bspec=None, space="p1rt0"):
        if space not in SPACES:
            raise ValueError(f"unknown space {space!r}")
        self.mesh = mesh
        self.bspec = bspec
        self.space = space
        V, E = mesh.num_vertices, mesh.num_edges
        v2 = 2 * mesh.cells
        p1 = np.stack([v2, v2 + 1], axis=-1).reshape(-1, 6)
        if space == "cr":
            e2 = 2 * mesh.cell_edges
            self.cell_dofs = np.stack([e2, e2 + 1], axis=-1).reshape(-1, 6)
            self.num_dofs = 2 * E
        elif space == "p1":
            self.cell_dofs = p1
            self.num_dofs = 2 * V
        else:
            self.cell_dofs = np.concatenate([p1, 2 * V + mesh.cell_edges], axis=1)
            self.num_dofs = 2 * V + E
        self.edge_offset = 2 * V

        constrained = np.zeros(self.num_dofs, dtype=bool)
        if bspec is not None:
            bspec.validate(mesh)
            dedges = bspec.dirichlet_edges(mesh)
            if space == "cr":
                constrained[2 * dedges] = True
                constrained[2 * dedges + 1] = True
            else:
                dverts = bspec.dirichlet_vertices(mesh)
                constrained[2 * dverts] = True
                constrained[2 * dverts + 1] = True
                if space != "p1":
                    constrained[2 * V + dedges] = True
        self.constrained = constrained
        self.free_dofs = np.flatnonzero(~constrained)
        self.neumann_edges = (bspec.neumann_edges(mesh) if bspec is not None
                              else mesh.boundary_edges[:0])

    @property
    def num_free(self):
        return len(self.free_dofs)

    @property
    def reported_ndof(self):
        """DOF count in the tabulated convention: ``2V + E`` for P1+RT0."""
        return self.num_dofs

    @property
    def num_local(self):
        return self.cell_dofs.shape[1]

    def zeros(self):
        return FeFunction(self, np.zeros(self.num_dofs))

    def function(self, coefficients):
        return FeFunction(self, coefficients)

    def random(self, rng, p1=True, rt=True):
        """Random function with constrained DOFs zeroed."""
        c = rng.standard_normal(self.num_dofs)
        if self.space in ("p1rt0", "br"):
            if not p1:
                c[:self.edge_offset] = 0.0
            if not rt:
                c[self.edge_offset:] = 0.0
        c[self.constrained] = 0.0
        return FeFunction(self, c)


class FeFunction:
    """Coefficient vector over a :class:`DofMap`."""

    def __init__(self, dofmap, coefficients):
        coefficients = np.asarray(coefficients)
        if coefficients.shape != (dofmap.num_dofs,):
            raise ValueError("coefficient vector has the wrong length")
        self.dofmap = dofmap
        self.coefficients = coefficients.astype(float)

    @property
    def mesh(self):
        return self.dofmap.mesh

    @property
    def space(self):
        return self.dofmap.space

    def __add__(self, other):
        return FeFunction(self.dofmap, self.coefficients + other.coefficients)

    def __sub__(self, other):
        return FeFunction(self.dofmap, self.coefficients - other.coefficients)

    def __mul__(self, scalar):
        return FeFunction(self.dofmap, scalar * self.coefficients)

    __rmul__ = __mul__

    @property
    def vertex_values(self):
        """P1 part as ``(V, 2)`` (not defined for ``cr``)."""
        if self.space == "cr":
            raise ValueError("CR functions have no vertex DOFs")
        return self.coefficients[:self.dofmap.edge_offset].reshape(-1, 2)

    @property
    def edge_values(self):
        """RT0 fluxes (or bubble amplitudes) per edge."""
        if self.space in ("p1", "cr"):
            raise ValueError(f"{self.space} functions have no edge DOFs")
        return self.coefficients[self.dofmap.edge_offset:]

    def p1_part(self):
        c = self.coefficients.copy()
        if self.space in ("p1rt0", "br"):
            c[self.dofmap.edge_offset:] = 0.0
        return FeFunction(self.dofmap, c)

    def rt_part(self):
        c = self.coefficients.copy()
        c[:self.dofmap.edge_offset] = 0.0
        return FeFunction(self.dofmap, c)

    def local_coefficients(self):
        return self.coefficients[self.dofmap.cell_dofs]

    def values_at(self, bary):
        """Values at barycentric points of every cell, ``(T, nq, 2)``."""
        phi = local_values(self.mesh, self.space, bary)
        return np.einsum("tl,tlqk->tqk", self.local_coefficients(), phi)

    def gradients_at(self, bary):
        """Gradients ``(T, nq, 2, 2)`` with layout ``[comp, deriv]``."""
        g = local_gradients(self.mesh, self.space, bary)
        return np.einsum("tl,tlqij->tqij", self.local_coefficients(), g)

    def cell_divergence(self):
        """Cellwise divergence (mean divergence for ``br``)."""
        d = local_divergences(self.mesh, self.space)
        return np.einsum("tl,tl->t", self.local_coefficients(), d)

    def cell_strain(self):
        """Constant strain of the P1 part per cell, ``(T, 2, 2)``."""
        if self.space == "cr":
            g = self.gradients_at(np.full((1, 3), 1 / 3))[:, 0]
        else:
            g = self.p1_part().gradients_at(np.full((1, 3), 1 / 3))[:, 0]
        return 0.5 * (g + np.swapaxes(g, -1, -2))

    def evaluate(self, cell, point, tol=1e-12):
        """Value, gradient and divergence at a point of ``cell``."""
        mesh = self.mesh
        cell = int(cell)
        point = np.asarray(point, dtype=float)
        p = mesh.cell_points[cell]
        g = mesh.barycentric_gradients[cell]
        lam = np.array([(point - p[(i + 1) % 3]) @ g[i] for i in range(3)])
        scale = mesh.cell_diameters[cell]
        if lam.min() < -tol * max(1.0, scale):
            raise ValueError(f"point {point.tolist()} is outside cell {cell}")
        bary = lam[None, :]
        coef = self.local_coefficients()[cell]
        sub = _SingleCell(mesh, cell)
        phi = local_values(sub, self.space, bary)[0]
        dphi = local_gradients(sub, self.space, bary)[0]
        value = np.einsum("l,lqk->k", coef, phi)
        grad = np.einsum("l,lqij->ij", coef, dphi)
        return {"value": value, "gradient": grad, "divergence": float(np.trace(grad))}


class _SingleCell:
    """View of one cell exposing the attributes the local bases need."""

    def __init__(self, mesh, cell):
        sl = slice(cell, cell + 1)
        self.num_cells = 1
        self.cell_points = mesh.cell_points[sl]
        self.areas = mesh.areas[sl]
        self.cell_edges = np.arange(3)[None, :]
        self.cell_edge_signs = mesh.cell_edge_signs[sl]
        self.edge_lengths = mesh.edge_lengths[mesh.cell_edges[cell]]
        self.edge_normals = mesh.edge_normals[mesh.cell_edges[cell]]
        self.barycentric_gradients = mesh.barycentric_gradients[sl]

    def map_to_cells(self, bary):
        return np.einsum("qi,tik->tqk", np.asarray(bary), self.cell_points)


# interpolation -------------------------------------------------------------

def _vector_field(v, x):
    shape = x.shape
    out = np.asarray(v(x.reshape(-1, 2)), dtype=float)
    return out.reshape(shape)


def interp_nodal(dofmap, v):
    """Nodal interpolant: P1 coefficients equal the vertex values of ``v``."""
    if dofmap.space == "cr":
        raise ValueError("nodal interpolation needs vertex DOFs")
    c = np.zeros(dofmap.num_dofs)
    c[:dofmap.edge_offset] = _vector_field(v, dofmap.mesh.vertices).ravel()
    c[dofmap.constrained] = 0.0
    return FeFunction(dofmap, c)


def edge_mean_flux(mesh, v, edges=None, npoints=3):
    """``(1/|e|) * integral over e of v . n_e`` by Gauss quadrature."""
    if edges is None:
        edges = np.arange(mesh.num_edges)
    s, w = gauss_interval(npoints)
    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    x = a[:, None] + s[None, :, None] * (b - a)[:, None]
    vals = _vector_field(v, x)
    vn = np.einsum("eqk,ek->eq", vals, mesh.edge_normals[edges])
    return vn @ w


def interp_rt(dofmap, v):
    """RT0 interpolant: edge coefficient equals the mean normal flux of ``v``."""
    if dofmap.space != "p1rt0":
        raise ValueError("RT0 interpolation needs a p1rt0 DofMap")
    c = np.zeros(dofmap.num_dofs)
    c[dofmap.edge_offset:] = edge_mean_flux(dofmap.mesh, v)
    c[dofmap.constrained] = 0.0
    return FeFunction(dofmap, c)


def interp_composite(dofmap, v):
    """``Pi v = Pi1 v + PiR (v - Pi1 v)``."""
    mesh = dofmap.mesh
    nodal = interp_nodal(dofmap, v)
    vv = nodal.vertex_values
    s, w = gauss_interval(3)
    ia, ib = mesh.edges[:, 0], mesh.edges[:, 1]
    a, b = mesh.vertices[ia], mesh.vertices[ib]
    x = a[:, None] + s[None, :, None] * (b - a)[:, None]
    lin = vv[ia][:, None] + s[None, :, None] * (vv[ib] - vv[ia])[:, None]
    rem = _vector_field(v, x) - lin
    flux = np.einsum("eqk,ek->eq", rem, mesh.edge_normals) @ w
    c = nodal.coefficients.copy()
    c[dofmap.edge_offset:] = flux
    c[dofmap.constrained] = 0.0
    return FeFunction(dofmap, c)


def edge_fluxes(u):
    """Mean normal flux of a discrete function on every edge, from one side."""
    mesh = u.mesh
    cell = mesh.edge_cells[:, 0]
    local = np.argmax(mesh.cell_edges[cell] == np.arange(mesh.num_edges)[:, None],
                      axis=1)
    s, w = gauss_interval(2)
    flux = np.zeros(mesh.num_edges)
    for m in range(3):
        sel = local == m
        if not np.any(sel):
            continue
        i, j = LOCAL_EDGES[m]
        for sq, wq in zip(s, w):
            bary = np.zeros((1, 3))
            bary[0, i], bary[0, j] = 1.0 - sq, sq
            vals = u.values_at(bary)[cell[sel], 0]
            flux[sel] += wq * np.einsum("ek,ek->e", vals, mesh.edge_normals[sel])
    return flux


def project_p0(mesh, r, degree=6):
    """Cell means of the scalar field ``r`` with a degree-``degree`` rule."""
    bary, w = triangle_rule(degree)
    x = mesh.map_to_cells(bary)
    vals = np.asarray(r(x.reshape(-1, 2)), dtype=float).reshape(x.shape[:2])
    return vals @ w
