"""Sweep the cap distance of the rectangle family.

Prints one CSV row per lambda: hump-inequality verdict, chord-solver TV
against the closed form, and optionally the oracle gap.

    python scripts/rect_hump_sweep.py --L 4 --n 15 [--h 1/16]
"""

import argparse
import csv
import sys
from fractions import Fraction

import numpy as np

from lglab import admissibility, fixtures
from lglab.chord_solver import SolverConfig, solve, tv_coarea
from lglab.tv_oracle import compare, solve_oracle


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=float, default=4.0)
    ap.add_argument("--n", type=int, default=15, help="number of lambda values in (0, L)")
    ap.add_argument("--levels", type=int, default=256)
    ap.add_argument("--h", type=lambda s: float(Fraction(s)), default=None, help="also run the oracle at this spacing")
    args = ap.parse_args(argv)

    w = csv.writer(sys.stdout)
    w.writerow(["lambda", "verdict", "tv_solver", "tv_vertical_chords", "oracle_linf", "oracle_tv"])
    for lam in np.linspace(0, args.L, args.n + 2)[1:-1]:
        inst = fixtures.rect_hump(args.L, float(lam))
        f = inst.datum
        rep = admissibility.check(f)
        sol = solve(f, SolverConfig(levels=args.levels), force=True)
        exact = 4 * fixtures.rect_cap_value(args.L, float(lam))
        row = [f"{lam:.4f}", rep.verdict, f"{tv_coarea(sol):.6f}", f"{exact:.6f}", "", ""]
        if args.h:
            c = compare(solve_oracle(f, args.h, 16, args.levels), sol)
            row[4:] = [f"{c.linf:.4f}", f"{c.tv_oracle:.6f}"]
        w.writerow(row)
        sys.stdout.flush()


if __name__ == "__main__":
    main()
