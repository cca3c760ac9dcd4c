"""Cut cost of straight interfaces per stencil.

Solves the linear ramp f = cos(theta) x + sin(theta) y on the unit square and
divides the oracle TV by the exact value; the continuum prediction of each
stencil is printed next to it.
"""

import argparse
import math

import numpy as np

from lglab.datum import datum_from_vertex_values
from lglab.geometry import ConvexPolygon
from lglab.tv_oracle import crofton_line_factor, solve_oracle

SQ = ConvexPolygon.from_points([(0, 0), (1, 0), (1, 1), (0, 1)])


def ramp(theta):
    c, s = math.cos(theta), math.sin(theta)
    return datum_from_vertex_values(SQ, [0.0, c, c + s, s])


def exact_tv(theta):
    # |grad| = 1, so TV is the area of the square
    return 1.0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=1 / 64)
    ap.add_argument("--levels", type=int, default=64)
    ap.add_argument("--angles", type=int, default=7, help="directions in [0, pi/4]")
    args = ap.parse_args(argv)

    print(f"{'theta':>8} {'conn':>4} {'measured':>9} {'predicted':>9}")
    for theta in np.linspace(0, math.pi / 4, args.angles):
        for conn in (4, 8, 16):
            D = solve_oracle(ramp(theta), args.h, conn, args.levels)
            # the level lines run perpendicular to the gradient
            pred = crofton_line_factor(conn, theta + math.pi / 2)
            print(f"{theta:8.4f} {conn:4d} {D.tv / exact_tv(theta):9.4f} {pred:9.4f}")


if __name__ == "__main__":
    main()
