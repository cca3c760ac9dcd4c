"""Truncations of the wedge with accumulating plateaus.

Solves truncation k and k + 1 and reports the sup difference on the smaller
domain, the boundary TV and the number of constant regions found.
"""

import argparse

from lglab import fixtures
from lglab.chord_solver import solve, stability_check, tv_coarea
from lglab.datum import boundary_tv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--kmax", type=int, default=8)
    ap.add_argument("--grid", type=int, default=64)
    args = ap.parse_args(argv)

    ih = fixtures.InfiniteHumps(alpha=args.alpha)
    prev = None
    print(f"{'k':>3} {'boundary_tv':>12} {'tv':>10} {'regions':>7} {'sup_diff':>10}")
    for k in range(1, args.kmax + 1):
        f = ih.instance(k).datum
        sol = solve(f)
        diff = stability_check(prev, sol, args.grid) if prev is not None else float("nan")
        regions = len(sol.fat) + len(sol.plateau_regions)
        print(f"{k:3d} {boundary_tv(f):12.6f} {tv_coarea(sol):10.6f} {regions:7d} {diff:10.3g}")
        prev = sol


if __name__ == "__main__":
    main()
