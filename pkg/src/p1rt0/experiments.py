"""Convergence studies, parameter sweeps and the Cook's membrane benchmark."""
from __future__ import annotations

import dataclasses
import io
import logging
import time
from pathlib import Path

import numpy as np

from . import analysis
from .assembly import SchemeConfig, assemble_scheme
from .femspace import BoundarySpec, mixed_right
from .mesh import (COOK_CORNERS, generate_cook_membrane, generate_perturbed_unit_square,
                   generate_structured_unit_square, load_mesh)

log = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = ("ndof", "h", "l2_error", "l2_rate", "h1_error", "h1_rate")
SWEEP_COLUMNS = ("lambda", "mu", "ndof", "h1_semi_norm")
COOKS_COLUMNS = ("nu", "scheme", "n", "ndof", "tip_displacement")


@dataclasses.dataclass
class ExperimentReport:
    kind: str
    scheme: str
    grid: str
    columns: tuple
    rows: list = dataclasses.field(default_factory=list)
    timings: list = dataclasses.field(default_factory=list)

    def column(self, name):
        return [r[name] for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_cell(row.get(c)) for c in self.columns) + "\n")
        return buf.getvalue()

    def write_csv(self, path):
        path = Path(path)
        try:
            path.write_text(self.to_csv())
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6e}"
    return str(v)


def lame_from_poisson(nu, E=1.0):
    """``(lambda, mu)`` from Young's modulus and Poisson's ratio."""
    if not -1.0 < nu < 0.5:
        raise ValueError("Poisson's ratio must lie in (-1, 1/2)")
    return E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))


# grids ---------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class GridLadder:
    name: str
    meshes: tuple
    structured: bool
    sizes: tuple = ()


def grid_ladder(spec, levels=5, domain="square"):
    """Mesh sequence from ``structured:N``, ``perturbed:N`` or ``file:P[,P...]``.

    Generated ladders start at ``N`` and double ``levels - 1`` times.
    ``domain="cook"`` maps structured grids onto the membrane.
    """
    kind, _, arg = spec.partition(":")
    if kind in ("structured", "perturbed"):
        try:
            n0 = int(arg)
        except ValueError:
            raise ValueError(f"bad grid size in {spec!r}") from None
        if n0 < 1 or levels < 1:
            raise ValueError("grid size and level count must be positive")
        sizes = tuple(n0 * 2 ** k for k in range(levels))
        if kind == "structured":
            gen = generate_cook_membrane if domain == "cook" else generate_structured_unit_square
            meshes = tuple(gen(n) for n in sizes)
        else:
            if domain == "cook":
                raise ValueError("perturbed grids exist for the unit square only")
            meshes = tuple(generate_perturbed_unit_square(n, seed=k)
                           for k, n in enumerate(sizes))
        return GridLadder(spec, meshes, kind == "structured", sizes)
    if kind == "file":
        paths = [p for p in arg.split(",") if p]
        if not paths:
            raise ValueError("file grid needs at least one path")
        return GridLadder(spec, tuple(load_mesh(p) for p in paths), False)
    raise ValueError(f"unknown grid specification {spec!r}")


# convergence ---------------------------------------------------------------

def _boundary(bc, ms=None, traction=None):
    if bc == "dirichlet":
        return BoundarySpec.pure_dirichlet()
    if bc == "mixed-right":
        return mixed_right(ms.traction if ms is not None else traction)
    raise ValueError(f"unknown boundary condition {bc!r}")


def _rates(values, ndofs, structured):
    out = [None] * len(values)
    if len(values) >= 2:
        r = analysis.convergence_rates(values, None if structured else ndofs)
        out[1:] = [float(x) for x in r]
    return out


def run_convergence(scheme, lam, mu, ladder, bc="dirichlet", ar_variant="adiv",
                    alpha=1.0, h1="full", keep_solutions=False):
    """Manufactured-solution errors and observed orders on a mesh ladder."""
    ms = analysis.sine_solution(lam, mu)
    bspec = _boundary(bc, ms)
    cfg = SchemeConfig(scheme, ar_variant, alpha, lam, mu, ms.f)
    report = ExperimentReport("convergence", scheme, ladder.name, CONVERGENCE_COLUMNS)
    solutions = []
    for mesh in ladder.meshes:
        t0 = time.perf_counter()
        uh = assemble_scheme(cfg, mesh, bspec).solve()
        report.timings.append(time.perf_counter() - t0)
        report.rows.append({
            "ndof": uh.dofmap.reported_ndof, "h": mesh.h,
            "l2_error": analysis.error_l2(ms.u, uh),
            "h1_error": analysis.error_h1_broken(ms.grad, uh, part=h1),
        })
        log.info("%s ndof=%d solved in %.2fs", scheme, uh.dofmap.reported_ndof,
                 report.timings[-1])
        if keep_solutions:
            solutions.append(uh)
    nd = report.column("ndof")
    for key in ("l2", "h1"):
        for row, r in zip(report.rows, _rates(report.column(f"{key}_error"), nd,
                                              ladder.structured)):
            row[f"{key}_rate"] = r
    return (report, solutions) if keep_solutions else report


def run_gradrobust(lams, mus, ladder, ar_variant="adiv", alpha=1.0, h1="full"):
    """``||grad_h u_h||`` for the gradient force, pure Dirichlet, scheme S1."""
    report = ExperimentReport("gradrobust", "S1", ladder.name, SWEEP_COLUMNS)
    for lam in lams:
        for mu in mus:
            cfg = SchemeConfig("S1", ar_variant, alpha, lam, mu, analysis.gradient_force)
            for mesh in ladder.meshes:
                t0 = time.perf_counter()
                uh = assemble_scheme(cfg, mesh).solve()
                report.timings.append(time.perf_counter() - t0)
                report.rows.append({"lambda": float(lam), "mu": float(mu),
                                    "ndof": uh.dofmap.reported_ndof,
                                    "h1_semi_norm": analysis.broken_h1_seminorm(uh, h1)})
    return report


# Cook's membrane -----------------------------------------------------------

COOK_TRACTION = (0.0, 1.0 / 16.0)
COOK_TIP = (48.0, 60.0)


def cook_boundary(traction=COOK_TRACTION):
    """Clamped left side, shear traction on the right, free elsewhere."""
    t = np.asarray(traction, dtype=float)

    def g(x, n):
        return np.broadcast_to(t, x.shape).copy()

    return BoundarySpec(("left",), {"right": g})


@dataclasses.dataclass
class CookResult:
    nu: float
    scheme: str
    n: int
    ndof: int
    tip_displacement: float
    dilation: np.ndarray
    solution: object


def tip_vertex(mesh, point=COOK_TIP):
    d = np.linalg.norm(mesh.vertices - np.asarray(point), axis=1)
    k = int(np.argmin(d))
    if d[k] > 1e-8 * max(1.0, float(np.abs(mesh.vertices).max())):
        raise ValueError(f"mesh has no vertex at {point}")
    return k


def run_cooks(nus, schemes, ladder, ar_variant="adiv", alpha=1.0):
    """Solve the membrane for every ``(nu, scheme, mesh)``; f = 0, E = 1.

    ``n`` in the results is the grid size for generated ladders and the
    ladder position for file meshes.
    """
    results = []
    bspec = cook_boundary()
    sizes = ladder.sizes or tuple(range(len(ladder.meshes)))
    for nu in nus:
        lam, mu = lame_from_poisson(nu)
        for scheme in schemes:
            cfg = SchemeConfig(scheme, ar_variant, alpha, lam, mu)
            for n, mesh in zip(sizes, ladder.meshes):
                uh = assemble_scheme(cfg, mesh, bspec).solve()
                tip = uh.vertex_values[tip_vertex(mesh), 1]
                results.append(CookResult(float(nu), scheme, n, uh.dofmap.reported_ndof,
                                          float(tip), uh.cell_divergence(), uh))
    return results


def cooks_report(results, grid=""):
    report = ExperimentReport("cooks", ",".join(sorted({r.scheme for r in results})),
                              grid, COOKS_COLUMNS)
    for r in results:
        report.rows.append({"nu": r.nu, "scheme": r.scheme, "n": r.n, "ndof": r.ndof,
                            "tip_displacement": r.tip_displacement})
    return report


def dilation_oscillation(mesh, dilation, tau=0.1, corner_radius=None, corners=COOK_CORNERS):
    """Fraction of interior-edge neighbour pairs with clearly opposite dilation.

    A pair counts when the two cell values have opposite signs and both
    exceed ``tau`` times the largest magnitude away from the corners.
    Cells whose centroid lies within ``corner_radius`` (default: a tenth of
    the bounding-box diagonal) of a domain corner are ignored, since the
    corner singularities legitimately produce sign changes there.
    """
    d = np.asarray(dilation, dtype=float)
    if corner_radius is None:
        lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
        corner_radius = 0.1 * float(np.linalg.norm(hi - lo))
    c = np.asarray(corners, dtype=float)
    dist = np.linalg.norm(mesh.centroids[:, None] - c[None], axis=2).min(axis=1)
    away = dist > corner_radius
    if not np.any(away):
        return 0.0
    scale = np.abs(d[away]).max()
    if scale == 0.0:
        return 0.0
    ie = mesh.interior_edges
    a, b = mesh.edge_cells[ie, 0], mesh.edge_cells[ie, 1]
    pairs = away[a] & away[b]
    strong = (np.abs(d[a]) > tau * scale) & (np.abs(d[b]) > tau * scale)
    flips = pairs & strong & (d[a] * d[b] < 0)
    return float(flips.sum() / max(int(pairs.sum()), 1))
