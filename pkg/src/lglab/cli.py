"""Command-line front end.

Exit codes: 0 when the verdict is positive (admissible, no non-existence
flag, solver and oracle agree), 1 when it is negative, 2 on bad input or a
refused resource request.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import admissibility, chord_solver, io, tv_oracle
from .datum import DatumError
from .fixtures import FIXTURES, FixtureError, FixtureSpec, Instance, build
from .geometry import GeometryError
from .grid import MAX_CELLS_PER_AXIS, GridError, GridSpec

log = logging.getLogger("lglab")

AGREEMENT_TOL = 0.05  # fraction of the data range
TRACE_LEVELS = 512


class UsageError(Exception):
    pass


def _number(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("instance")
    g.add_argument("--domain", type=Path, help="domain JSON file")
    g.add_argument("--datum", type=Path, help="boundary datum JSON file")
    g.add_argument("--fixture", choices=FIXTURES, help="built-in example instead of files")
    g.add_argument("--L", type=_number)
    g.add_argument("--lambda", dest="lam", type=_number)
    g.add_argument("--alpha", type=_number)
    g.add_argument("--gamma", type=_number)
    g.add_argument("--R", type=_number)
    g.add_argument("--L1", type=_number)
    g.add_argument("--k", type=int)
    g.add_argument("--eps1", type=_number)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled diagnostics (default 0)")


def _fixture_spec(name: str, args) -> FixtureSpec:
    return FixtureSpec(name, args.L, args.lam, args.alpha, args.gamma, args.R, args.L1, args.k, args.eps1)


def load_instance(args) -> Instance:
    if args.fixture:
        if args.domain or args.datum:
            raise UsageError("give either --fixture or --domain/--datum, not both")
        return build(_fixture_spec(args.fixture, args))
    if not (args.domain and args.datum):
        raise UsageError("an instance needs --fixture NAME or both --domain and --datum")
    meta = args.datum.parent / "instance.json"
    return io.load_instance(args.domain, args.datum, meta if meta.exists() else None)


def _out_dir(args, default: str) -> Path:
    return args.out if args.out is not None else Path(default)


def _grid_guard(P, n: int) -> GridSpec:
    if n < 1 or n > MAX_CELLS_PER_AXIS:
        raise GridError(f"grid {n} per axis outside 1..{MAX_CELLS_PER_AXIS}")
    return GridSpec.with_cells(P, n)


def _spacing_guard(P, h: float) -> None:
    x0, y0, x1, y1 = P.bbox
    # refinement study solves at h/2 as well
    if max(x1 - x0, y1 - y0) / h > MAX_CELLS_PER_AXIS:
        raise GridError(f"h={h:g} needs more than {MAX_CELLS_PER_AXIS} cells per axis")


def _print_notes(inst: Instance, out) -> None:
    for n in inst.notes:
        print(f"note: {n}", file=out)


# -- subcommands -------------------------------------------------------------------


def cmd_check(args, out=sys.stdout) -> int:
    inst = load_instance(args)
    rep = admissibility.check(inst.datum)
    print(rep.to_text(), file=out)
    _print_notes(inst, out)
    if args.out is not None:
        io.atomic_write(args.out / "report.json", rep.to_json() + "\n")
    return 0 if rep.admissible else 1


def cmd_solve(args, out=sys.stdout) -> int:
    inst = load_instance(args)
    f = inst.datum
    rep = admissibility.check(f)
    if not rep.admissible and not args.force:
        print(rep.to_text(), file=out)
        print("refusing to solve inadmissible data; pass --force for diagnostic mode", file=out)
        return 1
    spec = _grid_guard(inst.polygon, args.grid)
    t0 = time.perf_counter()
    sol = chord_solver.solve(f, chord_solver.SolverConfig(levels=args.levels), force=args.force)
    field = chord_solver.rasterize(sol, spec)
    tv = chord_solver.tv_coarea(sol)
    dt = time.perf_counter() - t0
    d = _out_dir(args, "lglab-solve")
    io.save_grid(field, d / "solution.grid")
    io.atomic_write(d / "solution.svg", io.solution_svg(sol))
    vals = field.masked()
    summary = {
        "verdict": rep.verdict,
        "diagnostic": sol.diagnostic,
        "tv": tv,
        "min": float(vals.min()) if vals.size else None,
        "max": float(vals.max()) if vals.size else None,
        "levels": len(sol.levels),
        "fat_regions": len(sol.fat),
        "warnings": list(sol.warnings),
        "seconds": dt,
    }
    io.atomic_write(d / "solution.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for w in sol.warnings:
        print(f"warning: {w}", file=out)
    print(f"TV {tv:.10g}  range [{summary['min']:.6g}, {summary['max']:.6g}]  levels {len(sol.levels)}  fat {len(sol.fat)}", file=out)
    print(f"wrote {d}/solution.grid, solution.svg, solution.json", file=out)
    _print_notes(inst, out)
    return 0 if rep.admissible else 1


def _oracle(inst: Instance, args):
    _spacing_guard(inst.polygon, args.h)
    return tv_oracle.solve_oracle(inst.datum, args.h, args.connectivity, args.levels)


def cmd_oracle(args, out=sys.stdout) -> int:
    inst = load_instance(args)
    f = inst.datum
    t0 = time.perf_counter()
    _spacing_guard(inst.polygon, args.h / 2)
    D = tv_oracle.solve_oracle(f, args.h, args.connectivity, args.levels)
    coarse = tv_oracle.solve_oracle(f, 2 * args.h, args.connectivity, args.levels)
    td = tv_oracle.trace_deviation(coarse, f, refined=D)
    dt = time.perf_counter() - t0
    d = _out_dir(args, "lglab-oracle")
    io.save_grid(D.field, d / "oracle.grid")
    rep = {
        "h": args.h,
        "connectivity": args.connectivity,
        "levels": len(D.levels),
        "tv": D.tv,
        "trace_deviation": td.sup_fine,
        "trace_deviation_coarse": td.sup,
        "threshold": td.threshold,
        "nonexistence_flag": td.flag,
        "seconds": dt,
    }
    io.atomic_write(d / "oracle.json", json.dumps(rep, indent=2, sort_keys=True) + "\n")
    print(f"oracle TV {D.tv:.8g}  nodes {D.graph.n_nodes}  levels {len(D.levels)}", file=out)
    print(f"trace deviation {td.sup_fine:.4g} (h={args.h:g}), {td.sup:.4g} (h={2 * args.h:g}); threshold {td.threshold:.4g}", file=out)
    print(f"non-existence flag: {'SET' if td.flag else 'clear'}", file=out)
    _print_notes(inst, out)
    return 1 if td.flag else 0


def cmd_compare(args, out=sys.stdout) -> int:
    inst = load_instance(args)
    f = inst.datum
    rep = admissibility.check(f)
    D = _oracle(inst, args)
    sol = chord_solver.solve(f, force=not rep.admissible)
    cmp = tv_oracle.compare(D, sol)
    ok = cmp.linf <= AGREEMENT_TOL * f.range
    payload = {"verdict": rep.verdict, "agree": ok, "tolerance": AGREEMENT_TOL * f.range, **cmp.to_dict()}
    if not rep.admissible and ok:
        payload["regime"] = "marginal: conditions fail yet solver and oracle agree"
    payload["notes"] = list(inst.notes)
    if args.out is not None:
        io.atomic_write(args.out / "compare.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"verdict {rep.verdict}", file=out)
    print(f"L_inf {cmp.linf:.4g}  L1 {cmp.l1:.4g}  TV oracle {cmp.tv_oracle:.6g}  TV solver {cmp.tv_solver:.6g}  gap {100 * cmp.tv_gap:.2f}%", file=out)
    print(f"agreement within {AGREEMENT_TOL:g} of range: {'yes' if ok else 'no'}", file=out)
    if "regime" in payload:
        print(payload["regime"], file=out)
    _print_notes(inst, out)
    return 0 if ok else 1


def cmd_example(args, out=sys.stdout) -> int:
    spec = _fixture_spec(args.name, args)
    inst = build(spec)
    d = _out_dir(args, args.name)
    paths = io.save_instance(inst, d)
    rep = admissibility.check(inst.datum)
    print(f"{args.name}: {inst.polygon.n_sides} sides, {len(rep.humps)} humps, verdict {rep.verdict}", file=out)
    for h in rep.humps:
        print(f"  {h.kind} hump value {h.value:.6g} on side {h.side}: a={io_point(h.a.point)} b={io_point(h.b.point)}", file=out)
    if rep.plateaus:
        vals = sorted({round(p.value, 12) for p in rep.plateaus})
        print(f"  plateau values: {', '.join(f'{v:.6g}' for v in vals)}", file=out)
    print("wrote " + ", ".join(str(p) for p in paths.values()), file=out)
    _print_notes(inst, out)
    return 0


def io_point(p) -> str:
    return f"({p[0]:.6g}, {p[1]:.6g})"


def cmd_render(args, out=sys.stdout) -> int:
    inst = load_instance(args)
    d = _out_dir(args, "lglab-render")
    if args.field is not None:
        g = io.load_grid(args.field)
        svg = io.field_svg(g, inst.polygon)
    else:
        sol = chord_solver.solve(inst.datum, chord_solver.SolverConfig(levels=args.levels), force=args.force)
        svg = io.solution_svg(sol)
    path = io.atomic_write(d / "render.svg", svg)
    print(f"wrote {path}", file=out)
    return 0


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lglab", description="Least gradient problems on convex polygons.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="admissibility report")
    _add_instance_args(c)
    _add_common(c)
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="chord solver, grid and SVG output")
    _add_instance_args(s)
    _add_common(s)
    s.add_argument("--grid", type=int, default=256, help="cells along the longer axis")
    s.add_argument("--levels", type=int, default=chord_solver.DEFAULT_LEVELS)
    s.add_argument("--force", action="store_true", help="solve inadmissible data in diagnostic mode")
    s.set_defaults(func=cmd_solve)

    for name, func, levels, helptext in (
        ("oracle", cmd_oracle, TRACE_LEVELS, "min-cut oracle with non-existence flag"),
        ("compare", cmd_compare, tv_oracle.DEFAULT_ORACLE_LEVELS, "oracle against chord solver"),
    ):
        o = sub.add_parser(name, help=helptext)
        _add_instance_args(o)
        _add_common(o)
        o.add_argument("--h", type=_number, default=1 / 64, help="grid spacing (fractions allowed, e.g. 1/64)")
        o.add_argument("--connectivity", type=int, choices=(4, 8, 16), default=16)
        o.add_argument("--levels", type=int, default=levels)
        o.set_defaults(func=func)

    e = sub.add_parser("example", help="write a built-in example as instance files")
    e.add_argument("name", choices=FIXTURES)
    for flag, dest in (("--L", "L"), ("--lambda", "lam"), ("--alpha", "alpha"), ("--gamma", "gamma"), ("--R", "R"), ("--L1", "L1"), ("--eps1", "eps1")):
        e.add_argument(flag, dest=dest, type=_number)
    e.add_argument("--k", type=int)
    _add_common(e)
    e.set_defaults(func=cmd_example)

    r = sub.add_parser("render", help="SVG of a solution or of a grid file")
    _add_instance_args(r)
    _add_common(r)
    r.add_argument("--field", type=Path, help="grid file to draw instead of solving")
    r.add_argument("--levels", type=int, default=chord_solver.DEFAULT_LEVELS)
    r.add_argument("--force", action="store_true")
    r.set_defaults(func=cmd_render)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    np.random.seed(args.seed)
    if getattr(args, "h", 1.0) <= 0:
        print("error: --h must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args, out=sys.stdout)
    except (io.InputError, UsageError, FixtureError, GeometryError, DatumError, GridError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except chord_solver.SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
