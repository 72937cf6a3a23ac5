"""Legacy ASCII VTK output of P1+RT0 fields on triangle meshes."""
from __future__ import annotations

from pathlib import Path

import numpy as np

VTK_TRIANGLE = 5


def _fmt(values):
    return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in values)


def write_vtk(path, mesh, point_vectors=None, cell_scalars=None, cell_vectors=None,
              title="p1rt0 field"):
    """Write an unstructured grid; vectors are padded with a zero z component."""
    path = Path(path)
    V, T = mesh.num_vertices, mesh.num_cells
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {V} double",
           _fmt(np.column_stack([mesh.vertices, np.zeros(V)])),
           f"CELLS {T} {4 * T}",
           "\n".join(f"3 {a} {b} {c}" for a, b, c in mesh.cells),
           f"CELL_TYPES {T}", "\n".join([str(VTK_TRIANGLE)] * T)]
    if point_vectors:
        out.append(f"POINT_DATA {V}")
        for name, v in point_vectors.items():
            out += [f"VECTORS {name} double",
                    _fmt(np.column_stack([v, np.zeros(V)]))]
    if cell_scalars or cell_vectors:
        out.append(f"CELL_DATA {T}")
        for name, s in (cell_scalars or {}).items():
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default",
                    "\n".join(f"{x:.17g}" for x in s)]
        for name, v in (cell_vectors or {}).items():
            out += [f"VECTORS {name} double",
                    _fmt(np.column_stack([v, np.zeros(T)]))]
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def write_solution(path, uh, title="p1rt0 field"):
    """Displacement (P1 part), dilation, and the cell-averaged RT0 part."""
    mesh = uh.mesh
    centroid = np.full((1, 3), 1.0 / 3.0)
    cells = {"dilation": uh.cell_divergence()}
    vectors = {}
    if uh.space in ("p1rt0", "br"):
        vectors["rt0_cell_average"] = uh.rt_part().values_at(centroid)[:, 0]
    if uh.space == "cr":
        return write_vtk(path, mesh, None, cells,
                         {"displacement": uh.values_at(centroid)[:, 0]}, title)
    return write_vtk(path, mesh, {"displacement": uh.vertex_values}, cells,
                     vectors, title)


def read_vtk(path):
    """Parse the subset of legacy ASCII VTK written by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile"):
        raise ValueError("not a legacy VTK file")
    if tokens[2].strip() != "ASCII":
        raise ValueError("only ASCII files are supported")
    words = " ".join(tokens[3:]).split()
    pos = 0

    def take(k):
        nonlocal pos
        chunk = words[pos:pos + k]
        if len(chunk) < k:
            raise ValueError("truncated VTK file")
        pos += k
        return chunk

    result = {"point_data": {}, "cell_data": {}}
    section = None
    while pos < len(words):
        key = take(1)[0]
        if key == "DATASET":
            result["dataset"] = take(1)[0]
        elif key == "POINTS":
            n, _ = take(2)
            result["points"] = np.array(take(3 * int(n)), dtype=float).reshape(-1, 3)
        elif key == "CELLS":
            n, size = map(int, take(2))
            raw = np.array(take(size), dtype=np.int64).reshape(n, -1)
            if np.any(raw[:, 0] != 3):
                raise ValueError("only triangles are supported")
            result["cells"] = raw[:, 1:]
        elif key == "CELL_TYPES":
            n = int(take(1)[0])
            result["cell_types"] = np.array(take(n), dtype=np.int64)
        elif key in ("POINT_DATA", "CELL_DATA"):
            section = ("point_data" if key == "POINT_DATA" else "cell_data", int(take(1)[0]))
        elif key == "SCALARS":
            name, _, ncomp = take(3)
            if take(2)[0] != "LOOKUP_TABLE":
                raise ValueError("expected LOOKUP_TABLE")
            result[section[0]][name] = np.array(take(section[1] * int(ncomp)), dtype=float)
        elif key == "VECTORS":
            name, _ = take(2)
            result[section[0]][name] = np.array(take(3 * section[1]), dtype=float).reshape(-1, 3)
        else:
            raise ValueError(f"unexpected keyword {key!r}")
    return result
