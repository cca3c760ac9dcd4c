"""Boundary-layer deviation of the oracle field under refinement.

For each lambda the rectangle instance is solved at h and h/2; the largest
per-bin deviation from the datum on both grids and the persistence flag are
printed.  Past lambda = L - 1 the deviation should stay put near the caps.
"""

import argparse
import csv
import sys
from fractions import Fraction

from lglab import fixtures
from lglab.cli import TRACE_LEVELS
from lglab.tv_oracle import solve_oracle, trace_deviation


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=float, default=4.0)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[1.0, 2.0, 2.5, 3.0, 3.2, 3.5])
    ap.add_argument("--h", type=lambda s: float(Fraction(s)), default=1 / 16)
    ap.add_argument("--levels", type=int, default=TRACE_LEVELS)
    args = ap.parse_args(argv)

    w = csv.writer(sys.stdout)
    w.writerow(["lambda", "h", "dev_coarse", "dev_fine", "threshold", "flag", "bins"])
    for lam in args.lambdas:
        f = fixtures.rect_hump(args.L, lam).datum
        coarse = solve_oracle(f, args.h, 16, args.levels)
        fine = solve_oracle(f, args.h / 2, 16, args.levels)
        td = trace_deviation(coarse, f, fine)
        w.writerow([lam, args.h, f"{td.sup:.4f}", f"{td.sup_fine:.4f}", f"{td.threshold:.4f}", td.flag, " ".join(map(str, td.bins))])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
