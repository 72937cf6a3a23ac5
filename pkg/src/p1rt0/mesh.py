"""2D triangulations with globally oriented edges and boundary labels.

Conventions used throughout the package:

* cells are stored counterclockwise;
* local edge ``m`` of a cell is the edge opposite local vertex ``m``;
* global edge ``(i, j)`` has ``i < j`` and unit normal obtained by rotating
  the tangent ``v_j - v_i`` by -90 degrees;
* ``cell_edge_signs[t, m]`` is +1 when the global normal of the edge points
  out of cell ``t`` and -1 otherwise.
"""
from __future__ import annotations

import dataclasses
import warnings
from functools import cached_property
from pathlib import Path

import numpy as np

LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])

SIDES = ("left", "right", "bottom", "top")


class MeshError(ValueError):
    """Invalid mesh input. ``code`` is a short machine-readable tag."""

    def __init__(self, code, message):
        super().__init__(f"{code}: {message}")
        self.code = code


class MeshWarning(UserWarning):
    pass


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclasses.dataclass(frozen=True, eq=False)
class Triangulation:
    vertices: np.ndarray        # (V, 2)
    cells: np.ndarray           # (T, 3), counterclockwise
    edges: np.ndarray           # (E, 2), i < j
    cell_edges: np.ndarray      # (T, 3)
    cell_edge_signs: np.ndarray  # (T, 3) in {+1, -1}
    edge_cells: np.ndarray      # (E, 2), second entry -1 on the boundary
    edge_labels: np.ndarray     # (E,) str, '' for interior edges

    @classmethod
    def from_cells(cls, vertices, cells, edge_labeler=None):
        """Build the edge topology from a vertex array and a cell list.

        Clockwise cells are reoriented (with a :class:`MeshWarning`).
        ``edge_labeler(mesh_vertices, boundary_edges) -> labels`` may assign
        boundary labels; by default every boundary edge is labelled
        ``"boundary"``.
        """
        vertices = np.asarray(vertices, dtype=float)
        cells = np.array(cells, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("bad_vertices", "vertices must have shape (V, 2)")
        if cells.ndim != 2 or cells.shape[1] != 3:
            raise MeshError("bad_cells", "cells must have shape (T, 3)")
        if cells.size and (cells.min() < 0 or cells.max() >= len(vertices)):
            raise MeshError("bad_index", "cell references a missing vertex")

        key = np.sort(cells, axis=1)
        _, first, counts = np.unique(key, axis=0, return_index=True,
                                     return_counts=True)
        if np.any(counts > 1):
            dup = int(first[np.argmax(counts > 1)])
            raise MeshError("duplicate_cell", f"cell {dup} is listed twice")

        p = vertices[cells]
        area2 = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                 - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        scale = np.max(np.abs(p - p[:, :1]), axis=(1, 2)) ** 2
        degenerate = np.abs(area2) <= 1e-14 * np.maximum(scale, 1e-300)
        if np.any(degenerate):
            bad = int(np.argmax(degenerate))
            raise MeshError("degenerate_cell", f"cell {bad} has zero area")
        cw = area2 < 0
        if np.any(cw):
            warnings.warn(f"reoriented {int(cw.sum())} clockwise cells",
                          MeshWarning, stacklevel=2)
            cells[cw] = cells[cw][:, [0, 2, 1]]

        ncell = len(cells)
        local = cells[:, LOCAL_EDGES].reshape(-1, 2)
        local_sorted = np.sort(local, axis=1)
        edges, inverse, counts = np.unique(local_sorted, axis=0,
                                           return_inverse=True,
                                           return_counts=True)
        inverse = inverse.ravel()
        if np.any(counts > 2):
            bad = edges[np.argmax(counts > 2)]
            raise MeshError("non_manifold_edge",
                            f"edge {tuple(int(v) for v in bad)} is shared by "
                            f"{int(counts.max())} cells")
        cell_edges = inverse.reshape(ncell, 3)

        owner = np.repeat(np.arange(ncell), 3)
        edge_cells = np.full((len(edges), 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        sorted_edges = inverse[order]
        starts = np.searchsorted(sorted_edges, np.arange(len(edges)))
        edge_cells[:, 0] = owner[order[starts]]
        has_two = counts == 2
        edge_cells[has_two, 1] = owner[order[starts[has_two] + 1]]

        tangent = vertices[edges[:, 1]] - vertices[edges[:, 0]]
        normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
        mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
        opposite = vertices[cells]                          # (T, 3, 2)
        outward = mid[cell_edges] - opposite                # (T, 3, 2)
        dots = np.einsum("tmk,tmk->tm", normal[cell_edges], outward)
        signs = np.where(dots > 0, 1, -1).astype(np.int64)

        boundary = np.flatnonzero(edge_cells[:, 1] < 0)
        labels = np.full(len(edges), "", dtype=object)
        if edge_labeler is None:
            labels[boundary] = "boundary"
        else:
            labels[boundary] = np.asarray(
                edge_labeler(vertices, edges[boundary]), dtype=object)
        return cls(_freeze(vertices), _freeze(cells), _freeze(edges),
                   _freeze(cell_edges), _freeze(signs), _freeze(edge_cells),
                   _freeze(labels))

    def relabel(self, edge_labeler):
        """Return a copy with boundary labels recomputed by ``edge_labeler``."""
        labels = np.array(self.edge_labels, dtype=object)
        b = self.boundary_edges
        labels[b] = np.asarray(edge_labeler(self.vertices, self.edges[b]),
                               dtype=object)
        return dataclasses.replace(self, edge_labels=_freeze(labels))

    # sizes ---------------------------------------------------------------
    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def num_edges(self):
        return len(self.edges)

    @cached_property
    def boundary_edges(self):
        return _freeze(np.flatnonzero(self.edge_cells[:, 1] < 0))

    @cached_property
    def interior_edges(self):
        return _freeze(np.flatnonzero(self.edge_cells[:, 1] >= 0))

    def edges_with_label(self, *labels):
        return np.flatnonzero(np.isin(self.edge_labels, list(labels)))

    # geometry ------------------------------------------------------------
    @cached_property
    def cell_points(self):
        """Vertex coordinates per cell, ``(T, 3, 2)``."""
        return _freeze(self.vertices[self.cells])

    @cached_property
    def areas(self):
        p = self.cell_points
        a = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        return _freeze(a)

    @cached_property
    def edge_lengths(self):
        t = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return _freeze(np.hypot(t[:, 0], t[:, 1]))

    @cached_property
    def edge_normals(self):
        t = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        n = np.column_stack([t[:, 1], -t[:, 0]])
        return _freeze(n / self.edge_lengths[:, None])

    @cached_property
    def edge_midpoints(self):
        v = self.vertices
        return _freeze(0.5 * (v[self.edges[:, 0]] + v[self.edges[:, 1]]))

    @cached_property
    def centroids(self):
        return _freeze(self.cell_points.mean(axis=1))

    @cached_property
    def cell_diameters(self):
        """h_T: longest edge of each cell."""
        return _freeze(self.edge_lengths[self.cell_edges].max(axis=1))

    @cached_property
    def perimeters(self):
        return _freeze(self.edge_lengths[self.cell_edges].sum(axis=1))

    @cached_property
    def inball_diameters(self):
        """rho_T: twice the inradius, ``4 |T| / perimeter``."""
        return _freeze(4.0 * self.areas / self.perimeters)

    @cached_property
    def outward_normals(self):
        """Outward unit normals per cell and local edge, ``(T, 3, 2)``."""
        n = self.edge_normals[self.cell_edges]
        return _freeze(n * self.cell_edge_signs[:, :, None])

    @cached_property
    def barycentric_gradients(self):
        """Gradients of the three barycentric coordinates, ``(T, 3, 2)``."""
        p = self.cell_points
        # grad lambda_i = rot(p_k - p_j) / (2|T|) with (i, j, k) cyclic
        pj = p[:, [1, 2, 0]]
        pk = p[:, [2, 0, 1]]
        d = pk - pj
        g = np.stack([-d[..., 1], d[..., 0]], axis=-1)
        return _freeze(g / (2.0 * self.areas[:, None, None]))

    @property
    def h(self):
        return float(self.cell_diameters.max())

    def shape_regularity(self):
        """gamma = max over cells of h_T / rho_T."""
        return float(np.max(self.cell_diameters / self.inball_diameters))

    def geometry(self, cell):
        """Geometric quantities of a single cell."""
        t = int(cell)
        return {
            "area": float(self.areas[t]),
            "h_T": float(self.cell_diameters[t]),
            "rho_T": float(self.inball_diameters[t]),
            "centroid": self.centroids[t].copy(),
            "edge_lengths": self.edge_lengths[self.cell_edges[t]].copy(),
            "outward_normals": self.outward_normals[t].copy(),
        }

    def map_to_cells(self, bary):
        """Physical points for barycentric coordinates, ``(T, nq, 2)``."""
        return np.einsum("qi,tik->tqk", np.asarray(bary), self.cell_points)

    def stats(self):
        labels, counts = np.unique(
            self.edge_labels[self.boundary_edges].astype(str),
            return_counts=True)
        return {
            "vertices": self.num_vertices,
            "edges": self.num_edges,
            "cells": self.num_cells,
            "interior_edges": len(self.interior_edges),
            "boundary_edges": len(self.boundary_edges),
            "boundary_labels": dict(zip(labels.tolist(), counts.tolist())),
            "h": self.h,
            "min_area": float(self.areas.min()),
            "shape_regularity": self.shape_regularity(),
            "ndof_p1rt0": 2 * self.num_vertices + self.num_edges,
        }


def format_stats(stats):
    lines = []
    for key, value in stats.items():
        if isinstance(value, dict):
            value = " ".join(f"{k}={v}" for k, v in value.items())
        elif isinstance(value, float):
            value = f"{value:.6g}"
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


# generators ---------------------------------------------------------------

def _grid_labeler(side_of_vertex):
    def labeler(vertices, bedges):
        a = side_of_vertex[bedges[:, 0]]
        b = side_of_vertex[bedges[:, 1]]
        common = a & b
        out = np.full(len(bedges), "boundary", dtype=object)
        for bit, name in enumerate(SIDES):
            out[(common >> bit) & 1 == 1] = name
        return out
    return labeler


def _is_convex_ccw(c):
    for k in range(4):
        a, b, d = c[k], c[(k + 1) % 4], c[(k + 2) % 4]
        cross = (b[0] - a[0]) * (d[1] - b[1]) - (b[1] - a[1]) * (d[0] - b[0])
        if cross <= 0:
            return False
    return True


def generate_mapped_quad(corners, n, m, diagonal="falling"):
    """Bilinear image of an ``n x m`` split-square grid.

    ``corners`` are the images of (0,0), (1,0), (1,1), (0,1) in
    counterclockwise order. Each grid square is split along its
    bottom-right to top-left diagonal (``diagonal="falling"``) or its
    bottom-left to top-right one (``"rising"``). Boundary edges are labelled
    ``left`` (xi=0), ``right`` (xi=1), ``bottom`` (eta=0) and ``top`` (eta=1)
    in parameter space.
    """
    c = np.asarray(corners, dtype=float)
    if c.shape != (4, 2):
        raise MeshError("bad_corners", "need exactly four 2D corners")
    n, m = int(n), int(m)
    if n < 1 or m < 1:
        raise MeshError("bad_size", "grid sizes must be positive")
    if diagonal not in ("falling", "rising"):
        raise ValueError(f"unknown diagonal {diagonal!r}")
    if not _is_convex_ccw(c):
        raise MeshError("non_convex", "corners must form a convex "
                        "counterclockwise quadrilateral")
    xi = np.linspace(0.0, 1.0, n + 1)
    eta = np.linspace(0.0, 1.0, m + 1)
    X, E = np.meshgrid(xi, eta)                  # (m+1, n+1), row = eta
    X = X.ravel()
    E = E.ravel()
    w = np.column_stack([(1 - X) * (1 - E), X * (1 - E), X * E, (1 - X) * E])
    vertices = w @ c
    # exact grid values where the map is affine along the sides
    i, j = np.meshgrid(np.arange(n + 1), np.arange(m + 1))
    i = i.ravel()
    j = j.ravel()

    def vid(ii, jj):
        return jj * (n + 1) + ii

    ii, jj = np.meshgrid(np.arange(n), np.arange(m))
    ii = ii.ravel()
    jj = jj.ravel()
    v00, v10 = vid(ii, jj), vid(ii + 1, jj)
    v11, v01 = vid(ii + 1, jj + 1), vid(ii, jj + 1)
    if diagonal == "rising":
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
    else:
        lower = np.column_stack([v00, v10, v01])
        upper = np.column_stack([v10, v11, v01])
    cells = np.empty((2 * n * m, 3), dtype=np.int64)
    cells[0::2] = lower
    cells[1::2] = upper

    side = ((i == 0) * 1 | (i == n) * 2 | (j == 0) * 4 | (j == m) * 8)
    return Triangulation.from_cells(vertices, cells,
                                    _grid_labeler(side.astype(np.int64)))


UNIT_SQUARE = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
COOK_CORNERS = ((0.0, 0.0), (48.0, 44.0), (48.0, 60.0), (0.0, 44.0))


def generate_structured_unit_square(n, diagonal="falling"):
    """``n x n`` squares on (0,1)^2, each cut into two triangles."""
    if int(n) < 1:
        raise MeshError("bad_size", "n must be positive")
    return generate_mapped_quad(UNIT_SQUARE, n, n, diagonal)


def generate_cook_membrane(n, m=None, diagonal="falling"):
    return generate_mapped_quad(COOK_CORNERS, n, n if m is None else m, diagonal)


def generate_perturbed_unit_square(n, amplitude=0.25, seed=0):
    """Unstructured-looking family: jittered interior vertices, random diagonals.

    Interior vertices move by up to ``amplitude * h`` in each direction and
    every square picks its diagonal at random (seeded, so reproducible).
    """
    n = int(n)
    if n < 1:
        raise MeshError("bad_size", "n must be positive")
    if not 0 <= amplitude < 0.5:
        raise ValueError("amplitude must lie in [0, 0.5)")
    rng = np.random.default_rng(seed)
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    inner = ((i > 0) & (i < n) & (j > 0) & (j < n)).ravel()
    shift = rng.uniform(-amplitude, amplitude, size=(int(inner.sum()), 2)) / n
    vertices[inner] += shift
    ii, jj = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (jj * (n + 1) + ii).ravel()
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    rising = rng.random(n * n) < 0.5
    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2] = np.where(rising[:, None], np.column_stack([v00, v10, v11]),
                           np.column_stack([v00, v10, v01]))
    cells[1::2] = np.where(rising[:, None], np.column_stack([v00, v11, v01]),
                           np.column_stack([v10, v11, v01]))
    return Triangulation.from_cells(vertices, cells, bbox_labeler())


def bbox_labeler(tol=1e-10):
    """Label boundary edges by the bounding-box side they lie on."""
    def labeler(vertices, bedges):
        lo = vertices.min(axis=0)
        hi = vertices.max(axis=0)
        scale = tol * max(float(np.max(hi - lo)), 1.0)
        a = vertices[bedges[:, 0]]
        b = vertices[bedges[:, 1]]
        out = np.full(len(bedges), "boundary", dtype=object)
        tests = (("left", 0, lo), ("right", 0, hi),
                 ("bottom", 1, lo), ("top", 1, hi))
        for name, axis, ref in tests:
            on = ((np.abs(a[:, axis] - ref[axis]) <= scale)
                  & (np.abs(b[:, axis] - ref[axis]) <= scale))
            out[on] = name
        return out
    return labeler


# node / ele files -----------------------------------------------------------

def _records(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append(line.split())
    if not rows:
        raise MeshError("empty_file", f"{path} has no records")
    return rows


def load_mesh(node_path, ele_path=None, edge_labeler=None):
    """Read a mesh in the ``.node`` / ``.ele`` ASCII format.

    If ``ele_path`` is omitted it is derived from ``node_path``. Indices are
    1-based unless the node list starts at 0. Boundary edges are labelled
    by bounding-box side unless another ``edge_labeler`` is given.
    """
    node_path = Path(node_path)
    if ele_path is None:
        ele_path = node_path.with_suffix(".ele")
    rows = _records(node_path)
    nv = int(rows[0][0])
    node_rows = rows[1:1 + nv]
    if len(node_rows) != nv:
        raise MeshError("truncated_file", f"{node_path}: expected {nv} nodes")
    ids = np.array([int(r[0]) for r in node_rows])
    vertices = np.array([[float(r[1]), float(r[2])] for r in node_rows])
    base = int(ids.min())
    index = np.full(int(ids.max()) - base + 1, -1, dtype=np.int64)
    index[ids - base] = np.arange(nv)

    rows = _records(ele_path)
    nt = int(rows[0][0])
    ele_rows = rows[1:1 + nt]
    if len(ele_rows) != nt:
        raise MeshError("truncated_file", f"{ele_path}: expected {nt} cells")
    raw = np.array([[int(r[1]), int(r[2]), int(r[3])] for r in ele_rows])
    if raw.min() < base or raw.max() - base >= len(index):
        raise MeshError("bad_index", "element references a missing node")
    cells = index[raw - base]
    if np.any(cells < 0):
        raise MeshError("bad_index", "element references a missing node")
    return Triangulation.from_cells(vertices, cells,
                                    edge_labeler or bbox_labeler())


def write_mesh(mesh, node_path, ele_path=None):
    """Write ``mesh`` as 1-based ``.node`` / ``.ele`` files."""
    node_path = Path(node_path)
    if ele_path is None:
        ele_path = node_path.with_suffix(".ele")
    with open(node_path, "w") as fh:
        fh.write(f"{mesh.num_vertices} 2 0 0\n")
        for k, (x, y) in enumerate(mesh.vertices, start=1):
            fh.write(f"{k} {float(x)!r} {float(y)!r}\n")
    with open(ele_path, "w") as fh:
        fh.write(f"{mesh.num_cells} 3 0\n")
        for k, (a, b, c) in enumerate(mesh.cells + 1, start=1):
            fh.write(f"{k} {a} {b} {c}\n")
