"""Command-line experiment runner.

Examples::

    p1rt0 convergence --scheme s1 --lambda 1e6 --grid structured:8 --levels 5
    p1rt0 convergence --scheme s2 --bc mixed-right --out table.csv
    p1rt0 gradrobust --lambda 1,1e4,1e6 --mu 1 --grid structured:8
    p1rt0 cooks --nu 0.33,0.4999 --scheme p1,s2 --grid structured:16 --vtk cook.vtk
    p1rt0 meshinfo --grid file:square.node
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments, vtk
from .linalg import SolverError
from .mesh import MeshError, format_stats

SCHEME_IDS = {"s1": "S1", "s2": "S2", "s3": "S3", "s4": "S4minus", "s4sym": "S4plus",
              "naive": "NAIVE", "p1": "P1", "br": "BR", "cr": "CR"}
AR_IDS = {"a0": "a0", "ad": "aD", "adiv": "adiv"}
MIXED_ONLY = {"s2", "s3", "s4", "s4sym", "naive"}
DIRICHLET_ONLY = {"s1", "cr"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty number list")
    return values


def _schemes(text):
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in SCHEME_IDS]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown scheme {','.join(bad) or text!r}; choose from {', '.join(SCHEME_IDS)}")
    return names


def build_parser():
    p = _Parser(prog="p1rt0", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(q, grid):
        q.add_argument("-v", "--verbose", action="store_true",
                       help="log solve timings to stderr")
        q.add_argument("--grid", default=grid,
                       help="structured:N, perturbed:N or file:PATH[,PATH...]")
        q.add_argument("--levels", type=int, default=5, help="refinements for generated grids")
        q.add_argument("--ar", choices=sorted(AR_IDS), default="adiv")
        q.add_argument("--alpha", type=float, default=1.0)
        q.add_argument("--h1", choices=("full", "p1only"), default="full")
        q.add_argument("--out", help="CSV output path (default: stdout)")
        q.add_argument("--vtk", help="VTK output path for the finest solution(s)")

    c = sub.add_parser("convergence", help="manufactured-solution error table")
    c.add_argument("--scheme", type=_schemes, default=["s1"])
    c.add_argument("--lambda", dest="lam", type=float, default=1.0)
    c.add_argument("--mu", type=float, default=1.0)
    c.add_argument("--bc", choices=("dirichlet", "mixed-right"), default="dirichlet")
    common(c, "structured:8")

    g = sub.add_parser("gradrobust", help="gradient-force sweep over lambda and mu")
    g.add_argument("--scheme", type=_schemes, default=["s1"])
    g.add_argument("--lambda", dest="lam", type=_floats, default=[1.0])
    g.add_argument("--mu", type=_floats, default=[1.0])
    g.add_argument("--bc", choices=("dirichlet",), default="dirichlet")
    common(g, "structured:8")

    k = sub.add_parser("cooks", help="Cook's membrane benchmark")
    k.add_argument("--scheme", type=_schemes, default=["p1", "s2"])
    k.add_argument("--nu", type=_floats, default=[0.33, 0.4999])
    common(k, "structured:16")
    k.set_defaults(levels=1)

    m = sub.add_parser("meshinfo", help="print mesh statistics")
    m.add_argument("--grid", default="structured:8")
    m.add_argument("--levels", type=int, default=1)
    m.add_argument("--domain", choices=("square", "cook"), default="square")
    m.add_argument("-v", "--verbose", action="store_true")
    return p


def _emit(report, out):
    text = report.to_csv()
    if out:
        report.write_csv(out)
    else:
        sys.stdout.write(text)


def _vtk_name(base, tag):
    base = Path(base)
    return base.with_name(f"{base.stem}_{tag}{base.suffix or '.vtk'}")


def _check_scheme(args):
    if len(args.scheme) != 1:
        raise UsageError(f"{args.command} takes exactly one scheme")
    s = args.scheme[0]
    if s in MIXED_ONLY and args.bc != "mixed-right":
        raise UsageError(f"scheme {s} needs --bc mixed-right")
    if s in DIRICHLET_ONLY and args.bc != "dirichlet":
        raise UsageError(f"scheme {s} is a pure displacement scheme; use --bc dirichlet")
    if s != "s1" and args.command == "gradrobust":
        raise UsageError("gradrobust runs scheme s1 only")
    return SCHEME_IDS[s]


def run(args):
    if args.levels < 1:
        raise UsageError("--levels must be positive")
    if args.command == "meshinfo":
        ladder = experiments.grid_ladder(args.grid, args.levels, args.domain)
        for mesh in ladder.meshes:
            sys.stdout.write(format_stats(mesh.stats()) + "\n")
        return
    if args.alpha <= 0:
        raise UsageError("--alpha must be positive")
    ar = AR_IDS[args.ar]
    if args.command == "convergence":
        scheme = _check_scheme(args)
        ladder = experiments.grid_ladder(args.grid, args.levels)
        report, sols = experiments.run_convergence(
            scheme, args.lam, args.mu, ladder, args.bc, ar, args.alpha, args.h1,
            keep_solutions=True)
        if args.vtk:
            vtk.write_solution(args.vtk, sols[-1], f"{scheme} convergence")
    elif args.command == "gradrobust":
        _check_scheme(args)
        ladder = experiments.grid_ladder(args.grid, args.levels)
        report = experiments.run_gradrobust(args.lam, args.mu, ladder, ar, args.alpha,
                                            args.h1)
    else:
        for s in args.scheme:
            if s in DIRICHLET_ONLY:
                raise UsageError(f"scheme {s} cannot take the membrane's traction boundary")
        ladder = experiments.grid_ladder(args.grid, args.levels, domain="cook")
        results = experiments.run_cooks(args.nu, [SCHEME_IDS[s] for s in args.scheme],
                                        ladder, ar, args.alpha)
        report = experiments.cooks_report(results, ladder.name)
        if args.vtk:
            finest = max(r.n for r in results)
            for r in results:
                if r.n == finest:
                    tag = f"{r.scheme.lower()}_nu{r.nu:g}_n{r.n}"
                    vtk.write_solution(_vtk_name(args.vtk, tag), r.solution,
                                       f"Cook membrane {r.scheme} nu={r.nu:g}")
    for t, row in zip(report.timings, report.rows):
        logging.getLogger("p1rt0").info("ndof=%s solve %.3fs", row["ndof"], t)
    _emit(report, args.out)


def _fail(code, message, status):
    sys.stderr.write(json.dumps({"error": code, "message": str(message)}) + "\n")
    return status


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(name)s: %(message)s", stream=sys.stderr)
        run(args)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except MeshError as exc:
        return _fail(f"mesh.{exc.code}", exc, 1)
    except SolverError as exc:
        return _fail("solver", exc, 1)
    except (OSError, ValueError) as exc:
        return _fail("invalid", exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
