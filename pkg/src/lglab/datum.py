"""Continuous piecewise-polynomial boundary data on a convex polygon.

Each side carries pieces ``p(s) = sum_k c_k (s - s0)^k`` in the side-local arc
length ``s``.  Everything downstream (humps, level crossings, total variation)
is computed from exact polynomial root isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .geometry import TOL_GEOM, ConvexPolygon, StrictConvexBoundary, point_segment_distance

MAX_DEGREE = 8
TOL_VAL_REL = 1e-9


class DatumError(ValueError):
    pass


def _trim(coeffs) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c) if c else (0.0,)


@dataclass(frozen=True)
class Piece:
    s0: float
    s1: float
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))
        if len(self.coeffs) - 1 > MAX_DEGREE:
            raise DatumError(f"piece degree {len(self.coeffs) - 1} exceeds {MAX_DEGREE}")
        if not self.s1 > self.s0:
            raise DatumError(f"empty piece [{self.s0}, {self.s1}]")

    @property
    def poly(self) -> Polynomial:
        return Polynomial(self.coeffs)

    @property
    def is_constant(self) -> bool:
        return len(self.coeffs) == 1

    @property
    def length(self) -> float:
        return self.s1 - self.s0

    def __call__(self, s):
        return self.poly(np.asarray(s, dtype=float) - self.s0)

    def critical_offsets(self) -> np.ndarray:
        """Offsets in (0, length) where the derivative changes sign or vanishes."""
        if self.is_constant or len(self.coeffs) == 2:
            return np.empty(0)
        return _real_roots_in(self.poly.deriv(), 0.0, self.length, open_ends=True)

    def level_offsets(self, t: float) -> np.ndarray:
        """Offsets in [0, length] where p = t (p assumed non-constant)."""
        if len(self.coeffs) == 2:
            c0, c1 = self.coeffs
            r = (t - c0) / c1
            L = self.length
            if -1e-9 * L <= r <= L * (1 + 1e-9):
                return np.array([min(max(r, 0.0), L)])
            return np.empty(0)
        return _real_roots_in(self.poly - t, 0.0, self.length, open_ends=False)


def _real_roots_in(p: Polynomial, lo: float, hi: float, open_ends: bool) -> np.ndarray:
    if p.degree() < 1:
        return np.empty(0)
    r = p.roots()
    scale = max(hi - lo, 1e-300)
    r = r[np.abs(r.imag) <= 1e-7 * max(1.0, scale)].real
    dp = p.deriv()
    for _ in range(3):  # Newton polish, accepted only where it lowers the residual
        d = dp(r)
        ok = np.abs(d) > 1e-300
        cand = np.where(ok, r - np.where(ok, p(r) / np.where(ok, d, 1.0), 0.0), r)
        r = np.where(np.abs(p(cand)) < np.abs(p(r)), cand, r)
    # near-multiple roots can come back far off; keep only genuine ones
    mag = np.abs(p.coef) @ np.maximum(1.0, np.abs(r))[None, :] ** np.arange(len(p.coef))[:, None] if len(r) else r
    r = r[np.abs(p(r)) <= 1e-9 * np.maximum(mag, 1e-300)]
    eps = 1e-12 * scale
    if open_ends:
        r = r[(r > lo + eps) & (r < hi - eps)]
    else:
        r = r[(r >= lo - 1e-9 * scale) & (r <= hi + 1e-9 * scale)]
        r = np.clip(r, lo, hi)
    r = np.sort(r)
    if len(r) > 1:
        keep = np.concatenate([[True], np.diff(r) > 1e-10 * scale])
        r = r[keep]
    return r


def affine_piece(s0: float, s1: float, coeffs_in_x: Sequence[float], x_at_s0: float, dx_ds: float) -> Piece:
    """Piece on [s0, s1] for a polynomial given in a coordinate x = x_at_s0 + dx_ds (s - s0)."""
    q = Polynomial(coeffs_in_x)(Polynomial([x_at_s0, dx_ds]))
    return Piece(s0, s1, tuple(q.coef))


def pieces_along_coordinate(
    length: float, x_start: float, x_end: float, spec: Sequence[tuple[float, float, Sequence[float]]]
) -> list[Piece]:
    """Turn ``[(x0, x1, coeffs_in_x), ...]`` into side pieces.

    The side is parametrized affinely by a coordinate x running from
    ``x_start`` (at s=0) to ``x_end`` (at s=length).  Intervals may be given in
    either orientation; they must cover the side.
    """
    dx = (x_end - x_start) / length
    out = []
    for x0, x1, coeffs in spec:
        sa, sb = sorted(((x0 - x_start) / dx, (x1 - x_start) / dx))
        sa, sb = max(sa, 0.0), min(sb, length)
        if sb - sa <= TOL_GEOM * length:
            continue
        out.append(affine_piece(sa, sb, coeffs, x_start + dx * sa, dx))
    out.sort(key=lambda p: p.s0)
    # snap joints so the pieces tile exactly
    fixed = []
    for i, p in enumerate(out):
        s0 = 0.0 if i == 0 else fixed[-1].s1
        s1 = length if i == len(out) - 1 else p.s1
        fixed.append(_reanchor(p, s0, s1))
    return fixed


def _reanchor(p: Piece, s0: float, s1: float) -> Piece:
    """Same polynomial, re-expressed with offset origin ``s0``."""
    if s0 == p.s0:
        return Piece(s0, s1, p.coeffs)
    q = p.poly(Polynomial([s0 - p.s0, 1.0]))
    return Piece(s0, s1, tuple(q.coef))


# -- boundary points -----------------------------------------------------------


@dataclass(frozen=True)
class BoundaryPoint:
    side: int
    s: float
    arc: float
    point: tuple

    @property
    def xy(self) -> np.ndarray:
        return np.array(self.point)

    def to_dict(self) -> dict:
        return {"side": self.side, "s": self.s, "arc": self.arc, "point": list(self.point)}


def boundary_point(P: ConvexPolygon, side: int, s: float) -> BoundaryPoint:
    s = float(min(max(s, 0.0), P.lengths[side]))
    xy = P.point_on_side(side, s)
    return BoundaryPoint(side, s, float(P.starts[side] + s), (float(xy[0]), float(xy[1])))


# -- the datum -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryDatum:
    polygon: ConvexPolygon
    sides: tuple  # tuple over sides of tuple[Piece, ...]
    fmin: float = field(init=False)
    fmax: float = field(init=False)

    def __post_init__(self):
        P = self.polygon
        sides = tuple(tuple(ps) for ps in self.sides)
        if len(sides) != P.n_sides:
            raise DatumError(f"datum has {len(sides)} sides, polygon has {P.n_sides}")
        for j, ps in enumerate(sides):
            if not ps:
                raise DatumError(f"side {j} has no pieces")
            L = P.lengths[j]
            tol = TOL_GEOM * max(1.0, L)
            if abs(ps[0].s0) > tol or abs(ps[-1].s1 - L) > tol:
                raise DatumError(f"pieces on side {j} do not span [0, {L:.12g}]")
            for k in range(1, len(ps)):
                if abs(ps[k].s0 - ps[k - 1].s1) > tol:
                    raise DatumError(f"gap or overlap between pieces {k - 1} and {k} on side {j}")
        object.__setattr__(self, "sides", sides)
        vals = []
        for ps in sides:
            for p in ps:
                vals.extend([p(p.s0), p(p.s1)])
                c = p.critical_offsets()
                if len(c):
                    vals.extend(p.poly(c).tolist())
        object.__setattr__(self, "fmin", float(min(vals)))
        object.__setattr__(self, "fmax", float(max(vals)))
        tol = self.tol_val
        for j, ps in enumerate(sides):
            for k in range(1, len(ps)):
                jump = abs(ps[k](ps[k].s0) - ps[k - 1](ps[k - 1].s1))
                if jump > tol:
                    raise DatumError(f"discontinuity {jump:.3g} inside side {j} between pieces {k - 1} and {k}")
            nxt = sides[(j + 1) % len(sides)][0]
            jump = abs(ps[-1](ps[-1].s1) - nxt(nxt.s0))
            if jump > tol:
                raise DatumError(f"discontinuity {jump:.3g} at vertex {(j + 1) % len(sides)} (end of side {j})")

    @property
    def range(self) -> float:
        return self.fmax - self.fmin

    @property
    def tol_val(self) -> float:
        r = self.fmax - self.fmin
        return TOL_VAL_REL * (r if r > 0 else 1.0)

    def pieces(self):
        """Yield (side, piece_index, piece, global arc offset of the side)."""
        for j, ps in enumerate(self.sides):
            for k, p in enumerate(ps):
                yield j, k, p, float(self.polygon.starts[j])

    def value_on_side(self, j: int, s):
        ps = self.sides[j]
        s = np.asarray(s, dtype=float)
        edges = np.array([p.s1 for p in ps[:-1]])
        k = np.searchsorted(edges, s, side="right")
        out = np.empty(s.shape)
        for i, p in enumerate(ps):
            m = k == i
            if np.any(m):
                out[m] = p(s[m])
        return out if out.shape else float(out)

    def eval(self, s):
        """Value at global arc length ``s`` in [0, perimeter)."""
        P = self.polygon
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr < -TOL_GEOM) or np.any(s_arr >= P.perimeter + TOL_GEOM):
            raise DatumError("arc length out of range")
        s_arr = np.clip(s_arr, 0.0, np.nextafter(P.perimeter, 0))
        j = np.clip(np.searchsorted(P.starts, s_arr, side="right") - 1, 0, P.n_sides - 1)
        out = np.empty(s_arr.shape)
        for side in np.unique(j):
            m = j == side
            out[m] = self.value_on_side(int(side), s_arr[m] - P.starts[side])
        return out if out.shape else float(out)

    def eval_point(self, pts):
        """Value at boundary points (nearest boundary point for points off the boundary)."""
        jj, ss, _, _ = self.polygon.nearest_boundary_many(pts)
        out = np.empty(len(jj))
        for side in np.unique(jj):
            m = jj == side
            out[m] = self.value_on_side(int(side), ss[m])
        return out

    def derivative_sign(self, j: int, s: float, direction: int) -> int:
        """Sign of the first nonvanishing one-sided derivative (d/ds) at side-local ``s``.

        ``direction`` +1 looks at s+ (increasing arc), -1 at s-; the returned sign
        is that of f(s + direction*h) - f(s) for small h > 0.  Vertices hand over
        to the neighbouring side.
        """
        P = self.polygon
        L = P.lengths[j]
        tol = TOL_GEOM * max(1.0, L)
        if direction > 0 and s >= L - tol:
            j, s = (j + 1) % P.n_sides, 0.0
        elif direction < 0 and s <= tol:
            j, s = (j - 1) % P.n_sides, float(P.lengths[(j - 1) % P.n_sides])
        ps = self.sides[j]
        if direction > 0:
            k = next(i for i, p in enumerate(ps) if s < p.s1 - tol or i == len(ps) - 1)
        else:
            k = next(i for i in range(len(ps) - 1, -1, -1) if s > ps[i].s0 + tol or i == 0)
        poly = ps[k].poly
        x = s - ps[k].s0
        for order in range(1, MAX_DEGREE + 1):
            poly = poly.deriv()
            d = float(poly(x))
            if abs(d) > 1e-12 * max(1.0, self.range):
                sgn = 1 if d > 0 else -1
                return sgn * (direction ** order)
            if poly.degree() == 0 and poly.coef[0] == 0:
                break
        return 0

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "sides": [
                {"side": j, "pieces": [{"s0": float(p.s0), "s1": float(p.s1), "coeffs": [float(c) for c in p.coeffs]} for p in ps]}
                for j, ps in enumerate(self.sides)
            ]
        }

    @classmethod
    def from_dict(cls, P: ConvexPolygon, data: dict) -> "BoundaryDatum":
        try:
            entries = data["sides"]
            by_side = {}
            for e in entries:
                j = int(e["side"])
                by_side[j] = [Piece(float(p["s0"]), float(p["s1"]), tuple(p["coeffs"])) for p in e["pieces"]]
        except (KeyError, TypeError) as exc:
            raise DatumError(f"malformed datum: {exc}") from exc
        missing = [j for j in range(P.n_sides) if j not in by_side]
        if missing:
            raise DatumError(f"datum missing sides {missing}")
        return cls(P, tuple(tuple(by_side[j]) for j in range(P.n_sides)))


def constant_datum(P: ConvexPolygon, value: float) -> BoundaryDatum:
    return BoundaryDatum(P, tuple((Piece(0.0, float(L), (value,)),) for L in P.lengths))


def datum_from_vertex_values(P: ConvexPolygon, values: Sequence[float]) -> BoundaryDatum:
    """Piecewise-linear datum interpolating the given vertex values."""
    n = P.n_sides
    sides = []
    for j in range(n):
        L = float(P.lengths[j])
        v0, v1 = float(values[j]), float(values[(j + 1) % n])
        sides.append((Piece(0.0, L, (v0, (v1 - v0) / L)),))
    return BoundaryDatum(P, tuple(sides))


# -- monotone runs and humps ------------------------------------------------------


@dataclass(frozen=True)
class Run:
    """Maximal sub-interval of a side on which f is constant (0), increasing (+1) or decreasing (-1)."""

    side: int
    s0: float
    s1: float
    direction: int
    value0: float
    value1: float


def side_runs(f: BoundaryDatum, j: int) -> list[Run]:
    runs: list[Run] = []
    tol = f.tol_val
    for p in f.sides[j]:
        if p.is_constant:
            v = p.coeffs[0]
            if runs and runs[-1].direction == 0 and abs(runs[-1].value1 - v) <= tol:
                r = runs[-1]
                runs[-1] = replace(r, s1=p.s1)
            else:
                runs.append(Run(j, p.s0, p.s1, 0, v, v))
            continue
        cuts = np.concatenate([[0.0], p.critical_offsets(), [p.length]])
        for a, b in zip(cuts[:-1], cuts[1:]):
            va, vb = float(p.poly(a)), float(p.poly(b))
            d = 1 if vb > va else -1
            if runs and runs[-1].direction == d:
                runs[-1] = replace(runs[-1], s1=p.s0 + b, value1=vb)
            else:
                runs.append(Run(j, p.s0 + a, p.s0 + b, d, va, vb))
    return runs


@dataclass(frozen=True)
class Hump:
    """Maximal interior extremum interval ``[a, b]`` on a side.

    ``a`` is the endpoint nearer the side's counterclockwise start.  Candidate
    lists hold every distance minimizer; an empty list means the level set
    off the hump is empty (distance reported as +inf).
    """

    side: int
    a: BoundaryPoint
    b: BoundaryPoint
    value: float
    kind: str  # "max" | "min"
    degenerate: bool = False
    dist_a: float = math.inf
    dist_b: float = math.inf
    candidates_y: tuple = ()
    candidates_z: tuple = ()
    chosen_y: Optional[BoundaryPoint] = None
    chosen_z: Optional[BoundaryPoint] = None

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.a.xy - self.b.xy))

    def to_dict(self) -> dict:
        d = {
            "side": self.side,
            "a": list(self.a.point),
            "b": list(self.b.point),
            "value": self.value,
            "kind": self.kind,
            "degenerate": self.degenerate,
            "dist_a": self.dist_a if math.isfinite(self.dist_a) else None,
            "dist_b": self.dist_b if math.isfinite(self.dist_b) else None,
            "candidates_y": [list(c.point) for c in self.candidates_y],
            "candidates_z": [list(c.point) for c in self.candidates_z],
        }
        if self.chosen_y is not None:
            d["chosen_y"] = list(self.chosen_y.point)
            d["chosen_z"] = list(self.chosen_z.point)
        return d


@dataclass(frozen=True)
class Plateau:
    """Constant run touching a vertex; excluded from the hump list but reported."""

    side: int
    s0: float
    s1: float
    value: float


@dataclass(frozen=True)
class HumpAnalysis:
    humps: tuple
    plateaus: tuple


def analyze_humps(f: BoundaryDatum, match: bool = True) -> HumpAnalysis:
    P = f.polygon
    humps, plateaus = [], []
    for j in range(P.n_sides):
        runs = side_runs(f, j)
        L = P.lengths[j]
        tol = TOL_GEOM * max(1.0, L)
        for i, r in enumerate(runs):
            if r.direction == 0:
                if r.s0 <= tol or r.s1 >= L - tol:
                    plateaus.append(Plateau(j, r.s0, r.s1, r.value0))
                    continue
                left, right = runs[i - 1].direction, runs[i + 1].direction
                if left == 1 and right == -1:
                    kind = "max"
                elif left == -1 and right == 1:
                    kind = "min"
                else:
                    continue
                humps.append(Hump(j, boundary_point(P, j, r.s0), boundary_point(P, j, r.s1), r.value0, kind))
            elif i + 1 < len(runs) and runs[i + 1].direction == -r.direction:
                # strict interior extremum between two monotone runs
                kind = "max" if r.direction == 1 else "min"
                bp = boundary_point(P, j, r.s1)
                humps.append(Hump(j, bp, bp, r.value1, kind, degenerate=True))
    humps.sort(key=lambda h: h.a.arc)
    if match:
        humps = [match_hump_endpoints(f, h) for h in humps]
    return HumpAnalysis(tuple(humps), tuple(plateaus))


def extract_humps(f: BoundaryDatum, P: Optional[ConvexPolygon] = None) -> list[Hump]:
    """All humps (including degenerate strict extrema) with matched candidates."""
    if P is not None and P is not f.polygon:
        raise DatumError("datum was built on a different polygon")
    return list(analyze_humps(f).humps)


# -- level sets --------------------------------------------------------------


@dataclass(frozen=True)
class LevelComponent:
    """Connected piece of f^{-1}(t) inside one datum piece: a point or an interval."""

    side: int
    s0: float
    s1: float

    @property
    def is_point(self) -> bool:
        return self.s1 == self.s0


def level_components(f: BoundaryDatum, t: float) -> list[LevelComponent]:
    out = []
    tol = f.tol_val
    for j, _, p, _ in f.pieces():
        if p.is_constant:
            if abs(p.coeffs[0] - t) <= tol:
                out.append(LevelComponent(j, p.s0, p.s1))
            continue
        for r in p.level_offsets(t):
            out.append(LevelComponent(j, p.s0 + float(r), p.s0 + float(r)))
    return out


def match_hump_endpoints(f: BoundaryDatum, h: Hump) -> Hump:
    """Fill the nearest-point candidate sets for both endpoints of ``h``."""
    P = f.polygon
    L = P.lengths[h.side]
    ex = TOL_GEOM * max(1.0, L) * 10
    comps = [
        c
        for c in level_components(f, h.value)
        if not (c.side == h.side and c.s0 >= h.a.s - ex and c.s1 <= h.b.s + ex)
    ]
    # components that straddle a hump endpoint only through the hump itself cannot occur: the
    # hump is maximal, so the neighbouring pieces leave the value immediately

    def nearest(x: np.ndarray):
        best, cands = math.inf, []
        for c in comps:
            a, b = P.point_on_side(c.side, c.s0), P.point_on_side(c.side, c.s1)
            if c.is_point:
                s, d = c.s0, float(np.linalg.norm(x - a))
            else:
                d_vec = P.directions[c.side]
                s = float(np.clip(np.dot(x - P.vertices[c.side], d_vec), c.s0, c.s1))
                d = float(point_segment_distance(x, a, b))
            cands.append((d, c.side, s))
        if not cands:
            return math.inf, ()
        best = min(c[0] for c in cands)
        tol = 1e-9 * max(1.0, P.diameter)
        chosen = []
        for d, side, s in sorted(cands, key=lambda c: (P.starts[c[1]] + c[2])):
            if d <= best + tol:
                bp = boundary_point(P, side, s)
                if not any(np.linalg.norm(bp.xy - o.xy) <= tol for o in chosen):
                    chosen.append(bp)
        return best, tuple(chosen)

    da, ya = nearest(h.a.xy)
    db, zb = nearest(h.b.xy)
    return replace(h, dist_a=da, dist_b=db, candidates_y=ya, candidates_z=zb)


@dataclass(frozen=True)
class LevelCrossing:
    arc: float
    side: int
    s: float
    point: tuple
    sign: int  # +1: f goes from below t to above t in increasing arc; 0: touch without crossing
    flat_interval: Optional[tuple] = None  # (arc0, arc1) when f == t on a nondegenerate set


@dataclass(frozen=True)
class LevelCrossings:
    t: float
    crossings: tuple
    regular: bool

    def __len__(self):
        return len(self.crossings)

    def __iter__(self):
        return iter(self.crossings)

    def __getitem__(self, i):
        return self.crossings[i]


def level_crossings(f: BoundaryDatum, t: float, strict_range: bool = True) -> LevelCrossings:
    """Sign-alternating crossings of level ``t`` in arc-length order.

    Tangential touches and flat intervals make the level non-regular; flats are
    reported as entries carrying ``flat_interval`` (sign 0 unless f passes
    through the level across the flat).
    """
    if strict_range and not (f.fmin < t < f.fmax):
        raise DatumError(f"level {t} outside the open range ({f.fmin}, {f.fmax})")
    P = f.polygon
    per = P.perimeter
    events = []  # [arc0, arc1]
    for c in level_components(f, t):
        a0 = float(P.starts[c.side] + c.s0)
        a1 = float(P.starts[c.side] + c.s1)
        events.append([a0, a1])
    if not events:
        return LevelCrossings(t, (), True)
    events.sort()
    merge_tol = 1e-10 * per
    merged = [events[0]]
    for e in events[1:]:
        if e[0] <= merged[-1][1] + merge_tol:
            merged[-1][1] = max(merged[-1][1], e[1])
        else:
            merged.append(e)
    if len(merged) > 1 and merged[-1][1] >= per - merge_tol and merged[0][0] <= merge_tol:
        last = merged.pop()
        merged[0] = [last[0] - per, merged[0][1]]
    n = len(merged)
    mids = []
    for i in range(n):
        lo = merged[i][1]
        hi = merged[(i + 1) % n][0] + (per if i == n - 1 else 0.0)
        mids.append(np.mod(0.5 * (lo + hi), per))
    gap_sign = np.sign(f.eval(np.array(mids)) - t).astype(int)
    out = []
    regular = True
    for i in range(n):
        before, after = int(gap_sign[i - 1]), int(gap_sign[i])
        a0, a1 = merged[i]
        flat = a1 - a0 > merge_tol
        sign = after if before != after and before != 0 and after != 0 else 0
        if flat or sign == 0:
            regular = False
        arc = float(np.mod(0.5 * (a0 + a1), per)) if flat else float(np.mod(a0, per))
        j, s = P.side_of_arc(arc)
        xy = P.point_on_side(j, s)
        out.append(
            LevelCrossing(
                arc, j, s, (float(xy[0]), float(xy[1])), sign,
                (float(np.mod(a0, per)), float(np.mod(a1, per))) if flat else None,
            )
        )
    out.sort(key=lambda c: c.arc)
    return LevelCrossings(t, tuple(out), regular)


def boundary_tv(f: BoundaryDatum) -> float:
    """Exact total variation of f around the boundary."""
    terms = []
    for _, _, p, _ in f.pieces():
        if p.is_constant:
            continue
        cuts = np.concatenate([[0.0], p.critical_offsets(), [p.length]])
        v = p.poly(cuts)
        terms.extend(np.abs(np.diff(v)).tolist())
    return math.fsum(terms)


# -- projected datum on a strictly convex approximation ---------------------------


@dataclass(frozen=True, eq=False)
class ProjectedDatum:
    """Sampled datum ``y -> f(pi(y))`` on the boundary of a strictly convex approximation."""

    boundary: StrictConvexBoundary
    points: np.ndarray
    arcs: np.ndarray  # cumulative polygonal arc length of the sample chain
    values: np.ndarray
    perimeter: float

    def value_at_arc(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        xp = np.concatenate([self.arcs, [self.perimeter]])
        fp = np.concatenate([self.values, self.values[:1]])
        return np.interp(s, xp, fp)


def project_datum(f: BoundaryDatum, B: StrictConvexBoundary, samples: int = 4096) -> ProjectedDatum:
    if B.polygon is not f.polygon:
        raise DatumError("strictly convex boundary built from a different polygon")
    pts, _, _ = B.sample(samples)
    vals = f.eval_point(pts)
    seg = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
    arcs = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
    return ProjectedDatum(B, pts, arcs, vals, float(seg.sum()))


def modulus_estimate(f: BoundaryDatum, r_grid: np.ndarray, samples: int = 2048) -> np.ndarray:
    """Upper estimate of the modulus of continuity of f on the grid ``r_grid``.

    Pairwise sup over a dense boundary sample, corrected by the sampling gap
    times the maximal slope, then replaced by its least concave majorant.
    """
    P = f.polygon
    s = np.linspace(0.0, P.perimeter, samples, endpoint=False)
    pts = P.point_at(s)
    v = f.eval(s)
    slope = max_slope(f)
    gap = P.perimeter / samples
    r_grid = np.asarray(r_grid, dtype=float)
    out = np.zeros(len(r_grid))
    # blockwise pair distances keep memory bounded
    dv_all = []
    dd_all = []
    block = 256
    for i in range(0, samples, block):
        d = np.linalg.norm(pts[i : i + block, None, :] - pts[None, :, :], axis=2).ravel()
        dv = np.abs(v[i : i + block, None] - v[None, :]).ravel()
        dd_all.append(d)
        dv_all.append(dv)
    d = np.concatenate(dd_all)
    dv = np.concatenate(dv_all)
    order = np.argsort(d)
    d, dv = d[order], np.maximum.accumulate(dv[order])
    idx = np.searchsorted(d, r_grid, side="right") - 1
    base = np.where(idx >= 0, dv[np.clip(idx, 0, None)], 0.0)
    out = np.minimum(base + slope * gap, f.range)
    out[r_grid <= 0] = 0.0
    return concave_majorant(r_grid, out)


def max_slope(f: BoundaryDatum) -> float:
    m = 0.0
    for _, _, p, _ in f.pieces():
        if p.is_constant:
            continue
        dp = p.poly.deriv()
        xs = np.concatenate([[0.0, p.length], _real_roots_in(dp.deriv(), 0.0, p.length, True)]) if dp.degree() >= 1 else np.array([0.0])
        m = max(m, float(np.abs(dp(xs)).max()))
    return m


def concave_majorant(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least concave majorant of points (x_i, y_i) with x sorted, including the origin."""
    xs = np.concatenate([[0.0], x])
    ys = np.concatenate([[0.0], y])
    hull = []  # upper hull indices
    for i in range(len(xs)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            cross = (xs[i1] - xs[i0]) * (ys[i] - ys[i0]) - (ys[i1] - ys[i0]) * (xs[i] - xs[i0])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(x, xs[hull], ys[hull])


def cut_datum(f: BoundaryDatum, Q: ConvexPolygon, new_side_value: float) -> BoundaryDatum:
    """Restrict ``f`` to the sides of a sub-polygon ``Q`` sharing boundary with f's polygon.

    Sides of Q lying on an original side inherit the restricted pieces; any
    other side (the cut) carries the constant ``new_side_value``.
    """
    P = f.polygon
    sides = []
    for i in range(Q.n_sides):
        a, b = Q.side(i)
        host = None
        for j in range(P.n_sides):
            va = P.vertices[j]
            if (
                abs(np.dot(a - va, P.normals[j])) <= 1e-9 * max(1.0, P.diameter)
                and abs(np.dot(b - va, P.normals[j])) <= 1e-9 * max(1.0, P.diameter)
                and float(np.dot(b - a, P.directions[j])) > 0
            ):
                host = j
                break
        L = float(Q.lengths[i])
        if host is None:
            sides.append((Piece(0.0, L, (float(new_side_value),)),))
            continue
        off = float(np.dot(a - P.vertices[host], P.directions[host]))
        pieces = []
        for p in f.sides[host]:
            lo, hi = max(p.s0, off), min(p.s1, off + L)
            if hi - lo <= TOL_GEOM * max(1.0, L):
                continue
            q = _reanchor(p, lo, hi)
            pieces.append(Piece(lo - off, hi - off, q.coeffs))
        pieces[0] = Piece(0.0, pieces[0].s1, pieces[0].coeffs)
        pieces[-1] = Piece(pieces[-1].s0, L, pieces[-1].coeffs)
        sides.append(tuple(pieces))
    return BoundaryDatum(Q, tuple(sides))
