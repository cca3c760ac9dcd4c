"""Named benchmark instances on rectangles, trapezoids and triangles.

The rectangle family uses the domain (-L, L) x (-1, 1) with the cap
``min(L^2 - x1^2, L^2 - (L - lam)^2)`` on the horizontal sides.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .datum import BoundaryDatum, Piece, cut_datum, pieces_along_coordinate
from .geometry import TOL_GEOM, ConvexPolygon, HalfPlane, half_plane_cut

FIXTURES = ("rect-hump", "opc-violation", "dcc-violation", "c2-tight", "infinite-humps")


class FixtureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Instance:
    polygon: ConvexPolygon
    datum: BoundaryDatum
    tag: Optional[str] = None
    params: dict = field(default_factory=dict)
    notes: tuple = ()


@dataclass(frozen=True)
class FixtureSpec:
    name: str
    L: Optional[float] = None
    lam: Optional[float] = None
    alpha: Optional[float] = None
    gamma: Optional[float] = None
    R: Optional[float] = None
    L1: Optional[float] = None
    k: Optional[int] = None
    eps1: Optional[float] = None

    def with_defaults(self) -> "FixtureSpec":
        d = {k: v for k, v in asdict(self).items() if v is not None}
        d.update({k: v for k, v in DEFAULTS[self.name].items() if k not in d})
        return FixtureSpec(**d)

    def params(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None and k != "name"}


DEFAULTS = {
    "rect-hump": {"L": 4.0, "lam": 1.0},
    "opc-violation": {"L": 6.0},
    "dcc-violation": {"L": 6.0, "alpha": 1.0},
    "c2-tight": {"L": 2.0, "alpha": 0.5, "gamma": 1.0},
    "infinite-humps": {"alpha": 0.5, "R": 1.0, "L1": 0.2, "k": 6, "eps1": 0.05},
}


def build(spec: FixtureSpec) -> Instance:
    if spec.name not in FIXTURES:
        raise FixtureError(f"unknown fixture {spec.name!r}; choose from {', '.join(FIXTURES)}")
    s = spec.with_defaults()
    builder = {
        "rect-hump": lambda: rect_hump(s.L, s.lam),
        "opc-violation": lambda: opc_violation(s.L),
        "dcc-violation": lambda: dcc_violation(s.L, s.alpha),
        "c2-tight": lambda: c2_tight(s.L, s.alpha, s.gamma),
        "infinite-humps": lambda: InfiniteHumps(s.alpha, s.R, s.L1, s.eps1).instance(int(s.k)),
    }[s.name]
    return builder()


def rectangle(L: float) -> ConvexPolygon:
    return ConvexPolygon.from_points([(-L, -1.0), (L, -1.0), (L, 1.0), (-L, 1.0)])


def _rect_datum(P: ConvexPolygon, L: float, top, bottom, right, left) -> BoundaryDatum:
    """Each argument is a spec list in the natural coordinate (x1 or x2) of that side."""
    return BoundaryDatum(
        P,
        (
            tuple(pieces_along_coordinate(2 * L, -L, L, bottom)),
            tuple(pieces_along_coordinate(2.0, -1.0, 1.0, right)),
            tuple(pieces_along_coordinate(2 * L, L, -L, top)),
            tuple(pieces_along_coordinate(2.0, 1.0, -1.0, left)),
        ),
    )


def rect_hump(L: float = 4.0, lam: float = 1.0) -> Instance:
    """Parabola L^2 - x1^2 capped at its value at distance ``lam`` from the corners."""
    if not L > 2:
        raise FixtureError("rect-hump requires L > 2")
    if not 0 < lam < L:
        raise FixtureError("rect-hump requires 0 < lambda < L")
    c = L - lam
    e = L * L - c * c
    g = [L * L, 0.0, -1.0]
    horiz = [(-L, -c, g), (-c, c, [e]), (c, L, g)]
    zero = [(-1.0, 1.0, [0.0])]
    P = rectangle(L)
    notes = ()
    if L - 2 <= lam < L - 1:
        notes = ("marginal regime: the hump inequality fails but the vertical-chord solution still exists",)
    elif lam == L - 1:
        notes = ("limit regime: vertical and horizontal level chords tie",)
    elif lam > L - 1:
        notes = ("horizontal chords are cheaper near the cap: no solution attains the trace",)
    return Instance(P, _rect_datum(P, L, horiz, horiz, zero, zero), "rect-hump", {"L": L, "lam": lam}, notes)


def rect_cap_value(L: float, lam: float) -> float:
    return L * L - (L - lam) ** 2


def rect_closed_form(L: float, lam: float, x1) -> np.ndarray:
    """Solution value at abscissa x1 for the admissible rectangle family."""
    x1 = np.asarray(x1, dtype=float)
    return np.minimum(L * L - x1 * x1, rect_cap_value(L, lam))


def opc_violation(L: float = 6.0) -> Instance:
    """Max plateau on top facing a min plateau on the bottom; vertical sides carry -x2."""
    if not L > 2:
        raise FixtureError("opc-violation requires L > 2")
    g = [(-L, 2 - L, [L - 1, 1.0]), (2 - L, L - 2, [1.0]), (L - 2, L, [L - 1, -1.0])]
    neg = [(x0, x1, [-c for c in cs]) for x0, x1, cs in g]
    side = [(-1.0, 1.0, [0.0, -1.0])]
    P = rectangle(L)
    return Instance(P, _rect_datum(P, L, g, neg, side, side), "opc-violation", {"L": L})


def trapezoid_roof(L: float, alpha: float) -> ConvexPolygon:
    return ConvexPolygon.from_points([(-L, -1.0), (L, -1.0), (L, 1.0), (0.0, 1.0 + alpha), (-L, 1.0)])


def dcc_violation(L: float = 6.0, alpha: float = 1.0) -> Instance:
    """Bottom plateau at 1 whose nearest equal-value points are the roof corners."""
    if not L > 2:
        raise FixtureError("dcc-violation requires L > 2")
    if not alpha > 0:
        raise FixtureError("dcc-violation requires alpha > 0")
    P = trapezoid_roof(L, alpha)
    beta = math.hypot(L, alpha)
    g = [(-L, 2 - L, [L - 1, 1.0]), (2 - L, L - 2, [1.0]), (L - 2, L, [L - 1, -1.0])]
    up = [(-1.0, 1.0, [0.0, 1.0])]
    # roof: 2 dist(x, V) / beta - 1, linear in arc length from the corner
    roof_down = (Piece(0.0, beta, (1.0, -2.0 / beta)),)
    roof_up = (Piece(0.0, beta, (-1.0, 2.0 / beta)),)
    datum = BoundaryDatum(
        P,
        (
            tuple(pieces_along_coordinate(2 * L, -L, L, g)),
            tuple(pieces_along_coordinate(2.0, -1.0, 1.0, up)),
            roof_down,
            roof_up,
            tuple(pieces_along_coordinate(2.0, 1.0, -1.0, up)),
        ),
    )
    return Instance(P, datum, "dcc-violation", {"L": L, "alpha": alpha})


def c2_tight(L: float = 2.0, alpha: float = 0.5, gamma: float = 1.0) -> Instance:
    """Triangle with a base plateau too short for its nearest matches on the slanted sides."""
    if not 0 < alpha < L:
        raise FixtureError("c2-tight requires 0 < alpha < L")
    if not gamma > 0:
        raise FixtureError("c2-tight requires gamma > 0")
    P = ConvexPolygon.from_points([(-L, 0.0), (L, 0.0), (0.0, gamma)])
    base = [
        (-L, -alpha, [L / (L - alpha), 1.0 / (L - alpha)]),
        (-alpha, alpha, [1.0]),
        (alpha, L, [L / (L - alpha), -1.0 / (L - alpha)]),
    ]
    slant = math.hypot(L, gamma)
    # h(d) = (1 - d/slant) / (1 - alpha/L), decreasing in the distance d to the apex
    k = 1.0 / (1.0 - alpha / L)
    to_apex = (Piece(0.0, slant, (0.0, k / slant)),)  # from B, d = slant - s
    from_apex = (Piece(0.0, slant, (k, -k / slant)),)
    datum = BoundaryDatum(P, (tuple(pieces_along_coordinate(2 * L, -L, L, base)), to_apex, from_apex))
    inst = Instance(P, datum, "c2-tight", {"L": L, "alpha": alpha, "gamma": gamma})
    return inst


def _ramp(knots, length: float, reverse: bool = False) -> tuple:
    """Piecewise-linear side through (distance, value) knots measured from the side start.

    With ``reverse`` the distances are measured from the side end.  Pieces are
    built in offset form so short steep ramps stay continuous to rounding.
    """
    if reverse:
        knots = [(length - x, v) for x, v in reversed(knots)]
    out = []
    for (x0, v0), (x1, v1) in zip(knots[:-1], knots[1:]):
        if x1 <= x0:
            continue
        out.append([x0, x1, (v0,) if v0 == v1 else (v0, (v1 - v0) / (x1 - x0))])
    out[0][0], out[-1][1] = 0.0, length
    return tuple(Piece(*p) for p in out)


@dataclass(frozen=True)
class InfiniteHumps:
    """Wedge of opening ``alpha`` with plateaus accumulating at the apex.

    Plateau i occupies (L_{2i}, L_{2i-1}) on the bottom side and its
    orthogonal projection on the slanted side, with value (-1)^{i+1}/i.
    """

    alpha: float = 0.5
    R: float = 1.0
    L1: float = 0.2
    eps1: float = 0.05

    def __post_init__(self):
        a = self.alpha
        if not 0 < a < math.pi / 2:
            raise FixtureError("infinite-humps requires 0 < alpha < pi/2")
        if not self.R > self.L1 / math.sin(a / 2):
            raise FixtureError("infinite-humps requires R > L1 / sin(alpha/2)")
        s = math.sin(a)
        bound = 0.5 * (1 - s) ** 2 / (1 + s)
        if not 0 < self.eps1 < min(bound, self.ratio_cap):
            raise FixtureError(f"infinite-humps requires 0 < eps1 < {min(bound, self.ratio_cap):.6g}")

    @property
    def ratio_cap(self) -> float:
        """Largest plateau ratio a/b keeping the slanted-side humps strictly inside the inequality.

        From the slanted copy of plateau (a, b) the nearest equal values on the
        bottom side lie at distances a sin(alpha) and b sin(alpha) cos(alpha).
        """
        s, c = math.sin(self.alpha), math.cos(self.alpha)
        return c * (1 - s) / (c + s)

    def eps(self, i: int) -> float:
        return self.eps1 / i

    def lengths(self, n: int) -> list[float]:
        """L_1 .. L_{2n+1}."""
        s = math.sin(self.alpha)
        out = [self.L1]
        for i in range(1, n + 1):
            e = self.eps(i)
            out.append(out[-1] * (self.ratio_cap - e))
            out.append(out[-1] * ((1 - s) - e * (1 + s) / (1 - s)))
        return out

    def value(self, i: int) -> float:
        return (-1.0) ** (i + 1) / i

    def plateau(self, i: int, Ls: list[float]) -> tuple[float, float]:
        return Ls[2 * i - 1], Ls[2 * i - 2]

    def triangle(self) -> ConvexPolygon:
        a, R = self.alpha, self.R
        return ConvexPolygon.from_points([(0.0, 0.0), (R, 0.0), (R * math.cos(a), R * math.sin(a))])

    def base(self, n: int) -> Instance:
        """Full wedge with plateaus 1..n and a linear ramp from 0 at the apex."""
        P = self.triangle()
        Ls = self.lengths(n)
        c = math.cos(self.alpha)
        knots = [(0.0, 0.0)]
        for i in range(n, 0, -1):
            a, b = self.plateau(i, Ls)
            knots += [(a, self.value(i)), (b, self.value(i))]
        knots.append((self.R, 1.0))
        # slanted side by distance from the apex: plateaus at projected positions
        knots2 = [(x * c, v) for x, v in knots[:-1]] + [(self.R, 1.0)]
        datum = BoundaryDatum(
            P,
            (
                _ramp(knots, float(P.lengths[0])),
                (Piece(0.0, float(P.lengths[1]), (1.0,)),),
                _ramp(knots2, float(P.lengths[2]), reverse=True),
            ),
        )
        return Instance(P, datum, "infinite-humps-base", self.params(n))

    def params(self, k: int) -> dict:
        return {"alpha": self.alpha, "R": self.R, "L1": self.L1, "eps1": self.eps1, "k": k}

    def cut_segment(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Cut line through b_{k+1} and its projection on the slanted side."""
        b = self.lengths(k + 1)[2 * k]
        c, s = math.cos(self.alpha), math.sin(self.alpha)
        return np.array([b, 0.0]), np.array([b * c * c, b * c * s])

    def instance(self, k: int) -> Instance:
        """Depth-k truncation: plateaus 1..k kept, the apex cap cut away."""
        if k < 1:
            raise FixtureError("truncation depth k must be >= 1")
        seg = self.cut_segment(k)
        width = float(np.linalg.norm(seg[1] - seg[0]))
        if width < 10 * TOL_GEOM * self.R:
            raise FixtureError(
                f"depth k={k} needs a cut of length {width:.3g}, below the geometric resolution; use a smaller k or alpha"
            )
        base = self.base(k + 1)
        Q = half_plane_cut(base.polygon, HalfPlane(tuple(map(tuple, seg)), (0.0, 0.0)))
        datum = cut_datum(base.datum, Q, self.value(k + 1))
        return Instance(Q, datum, "infinite-humps", self.params(k))
