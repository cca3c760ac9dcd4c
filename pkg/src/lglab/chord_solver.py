"""Constructive solver: superlevel-set boundaries as minimal non-crossing chords.

For each sampled level the crossings of the datum are matched by the
shortest non-crossing chord system (interval dynamic programming on the
cyclic crossing sequence).  Plateaus of the datum produce flat regions whose
value is exact.  The solution is evaluated through ray-parity membership in
the superlevel sets plus distance interpolation between neighbouring levels.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .admissibility import AdmissibilityReport, check
from .datum import (
    BoundaryDatum,
    LevelCrossings,
    cut_datum,
    level_components,
    level_crossings,
)
from .geometry import ConvexPolygon, HalfPlane, convex_hull, half_plane_cut
from .grid import GridField, GridSpec

log = logging.getLogger(__name__)

DEFAULT_LEVELS = 512
RAY_ANGLE = 1.0  # radians; generic direction for parity tests
FLAT_OFFSET_REL = 1e-6


class SolverError(RuntimeError):
    pass


class NonRegularLevel(SolverError):
    pass


@dataclass(frozen=True, eq=False)
class LevelChordSet:
    t: float
    chords: np.ndarray  # (k, 2, 2) endpoints
    arcs: np.ndarray  # (k, 2) arc positions of the endpoints
    total_length: float
    width: float = 0.0  # value span this level stands for in the coarea sum

    def __len__(self):
        return len(self.chords)


@dataclass(frozen=True, eq=False)
class FatLevelRegion:
    humps: tuple  # indices into the hump list
    vertices: np.ndarray  # ccw hull of the region
    value: float
    kind: str

    def contains(self, pts, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        v = self.vertices
        if len(v) < 3:
            return np.zeros(len(pts), dtype=bool)
        e = np.roll(v, -1, axis=0) - v
        rel = pts[:, None, :] - v[None]
        cr = e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0]
        return np.all(cr >= -tol, axis=1)


# -- matching ---------------------------------------------------------------------


def min_noncrossing_matching(points: np.ndarray, tol: float = 1e-12) -> tuple[float, list[tuple[int, int]]]:
    """Shortest perfect non-crossing matching of points given in cyclic order.

    Only pairs (i, j) with j - i odd are allowed, which for alternating signs
    is exactly "pair an up-crossing with a down-crossing".  Ties go to the
    smallest partner index of the first point.
    """
    n = len(points)
    if n % 2:
        raise SolverError(f"odd number of crossings ({n})")
    if n == 0:
        return 0.0, []
    P = np.asarray(points, dtype=float)
    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)
    INF = math.inf
    # C[i][j] for j >= i-1; empty interval costs 0
    C = np.full((n + 1, n + 1), INF)
    choice = np.full((n + 1, n + 1), -1, dtype=int)
    for i in range(n + 1):
        if i >= 1:
            C[i][i - 1] = 0.0
        C[i][i] = INF if i < n else 0.0
    for length in range(2, n + 1, 2):
        for i in range(0, n - length + 1):
            j = i + length - 1
            best, arg = INF, -1
            for k in range(i + 1, j + 1, 2):
                inner = C[i + 1][k - 1] if k - 1 >= i + 1 else 0.0
                rest = C[k + 1][j] if k + 1 <= j else 0.0
                c = D[i, k] + inner + rest
                if c < best - tol * max(1.0, best if best < INF else 1.0):
                    best, arg = c, k
            C[i][j] = best
            choice[i][j] = arg
    pairs: list[tuple[int, int]] = []
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if i > j:
            continue
        k = int(choice[i][j])
        pairs.append((i, k))
        stack.append((i + 1, k - 1))
        stack.append((k + 1, j))
    pairs.sort()
    return float(C[0][n - 1]), pairs


def build_level_boundary(f: BoundaryDatum, t: float, crossings: Optional[LevelCrossings] = None) -> LevelChordSet:
    """Minimal non-crossing chord system at a regular level ``t``."""
    lc = crossings if crossings is not None else level_crossings(f, t)
    if not lc.regular:
        raise NonRegularLevel(f"level {t:.12g} touches a flat interval or is tangential")
    cs = lc.crossings
    if len(cs) % 2:
        raise SolverError(f"odd number of crossings ({len(cs)}) at level {t:.12g}")
    pts = np.array([c.point for c in cs]).reshape(-1, 2)
    arcs = np.array([c.arc for c in cs])
    total, pairs = min_noncrossing_matching(pts)
    chords = np.array([[pts[i], pts[j]] for i, j in pairs]).reshape(-1, 2, 2)
    chord_arcs = np.array([[arcs[i], arcs[j]] for i, j in pairs]).reshape(-1, 2)
    return LevelChordSet(float(t), chords, chord_arcs, total)


# -- flat regions -------------------------------------------------------------------


def fat_regions(f: BoundaryDatum, report: Optional[AdmissibilityReport] = None) -> list[FatLevelRegion]:
    """One hull per hump (shared by mutually matched pairs)."""
    rep = report if report is not None else check(f)
    humps = rep.humps
    used = set()
    out = []
    for pair in rep.opc.shared_pairs:
        i, j = pair
        if i in used or j in used:
            continue
        h1, h2 = humps[i], humps[j]
        pts = [h1.a.xy, h1.b.xy, h2.a.xy, h2.b.xy]
        out.append(FatLevelRegion((i, j), convex_hull(pts), h1.value, h1.kind))
        used.update(pair)
    for i, h in enumerate(humps):
        if i in used or h.degenerate:
            continue
        y = h.chosen_y or (h.candidates_y[0] if h.candidates_y else None)
        z = h.chosen_z or (h.candidates_z[0] if h.candidates_z else None)
        if y is None or z is None:
            continue
        out.append(FatLevelRegion((i,), convex_hull([h.a.xy, h.b.xy, y.xy, z.xy]), h.value, h.kind))
    return out


# -- sampled levels ----------------------------------------------------------------


def flat_values(f: BoundaryDatum) -> list[float]:
    """Values taken on nondegenerate intervals of the boundary."""
    vals = set()
    for _, _, p, _ in f.pieces():
        if p.is_constant:
            vals.add(float(p.coeffs[0]))
    out = []
    for v in sorted(vals):
        if not out or abs(v - out[-1]) > f.tol_val:
            out.append(v)
    return out


def _regular_level(f: BoundaryDatum, lo: float, hi: float) -> tuple[float, LevelCrossings]:
    for frac in (0.5, 0.4, 0.6, 0.3, 0.7, 0.45, 0.55):
        t = lo + frac * (hi - lo)
        lc = level_crossings(f, t)
        if lc.regular:
            return t, lc
    raise NonRegularLevel(f"no regular level found in ({lo:.12g}, {hi:.12g}) ")


@dataclass(frozen=True)
class SolverConfig:
    levels: int = DEFAULT_LEVELS
    flat_offset_rel: float = FLAT_OFFSET_REL
    threads: Optional[int] = None
    use_fat_regions: bool = True


# -- the solution object -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundarySet:
    """Finite union of boundary points and segments (for the extreme anchors)."""

    segments: np.ndarray  # (k, 2, 2); points are zero-length segments

    def distance(self, pts: np.ndarray) -> np.ndarray:
        return _dist_to_segments(pts, self.segments)


def _boundary_set(f: BoundaryDatum, value: float) -> BoundarySet:
    P = f.polygon
    segs = []
    for c in level_components(f, value):
        segs.append([P.point_on_side(c.side, c.s0), P.point_on_side(c.side, c.s1)])
    return BoundarySet(np.array(segs, dtype=float).reshape(-1, 2, 2))


def _dist_to_segments(pts: np.ndarray, segs: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    if len(segs) == 0:
        return np.full(len(pts), math.inf)
    a = segs[:, 0][None]
    d = (segs[:, 1] - segs[:, 0])[None]
    L2 = np.einsum("...k,...k->...", d, d)
    rel = pts[:, None, :] - a
    t = np.where(L2 > 0, np.einsum("...k,...k->...", rel, d) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t[..., None] * d
    return np.linalg.norm(pts[:, None, :] - q, axis=2).min(axis=1)


@dataclass(frozen=True, eq=False)
class LevelSolution:
    polygon: ConvexPolygon
    datum: BoundaryDatum
    levels: np.ndarray
    chord_sets: tuple
    fat: tuple
    low: BoundarySet
    high: BoundarySet
    diagnostic: bool
    report: AdmissibilityReport
    warnings: tuple = ()
    plateau_regions: tuple = ()  # regions at boundary plateaus through vertices, reported only

    @property
    def fmin(self) -> float:
        return self.datum.fmin

    @property
    def fmax(self) -> float:
        return self.datum.fmax

    # membership in {u >= t_j}
    def member(self, j: int, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        P = self.polygon
        u = np.array([math.cos(RAY_ANGLE), math.sin(RAY_ANGLE)])
        texit = P.ray_exit_many(pts, u)
        ends = pts + texit[:, None] * u
        label = self.datum.eval_point(ends) > self.chord_sets[j].t
        chords = self.chord_sets[j].chords
        if len(chords):
            label ^= (_count_hits(pts, ends, chords) % 2).astype(bool)
        return label

    def level_index(self, pts: np.ndarray) -> np.ndarray:
        """Largest sampled level index whose superlevel set contains each point (-1 if none)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        m = len(self.levels)
        lo = np.full(len(pts), -1)
        hi = np.full(len(pts), m)
        while True:
            active = hi - lo > 1
            if not active.any():
                break
            mid = (lo + hi) // 2
            for j in np.unique(mid[active]):
                sel = active & (mid == j)
                inside = self.member(int(j), pts[sel])
                idx = np.flatnonzero(sel)
                lo[idx[inside]] = j
                hi[idx[~inside]] = j
        return lo

    def evaluate(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        pts = pts.reshape(-1, 2)
        P = self.polygon
        if not np.all(P.contains(pts, tol=1e-9 * max(1.0, P.diameter))):
            raise SolverError("evaluation point outside the domain")
        out = np.full(len(pts), np.nan)
        done = np.zeros(len(pts), dtype=bool)
        for region in self.fat:
            inside = region.contains(pts) & ~done
            out[inside] = region.value
            done |= inside
        rest = np.flatnonzero(~done)
        if len(rest):
            q = pts[rest]
            j = self.level_index(q)
            m = len(self.levels)
            t_lo = np.where(j >= 0, self.levels[np.clip(j, 0, m - 1)], self.fmin)
            t_hi = np.where(j + 1 < m, self.levels[np.clip(j + 1, 0, m - 1)], self.fmax)
            d_lo = np.empty(len(q))
            d_hi = np.empty(len(q))
            for k in np.unique(j):
                sel = j == k
                d_lo[sel] = self.low.distance(q[sel]) if k < 0 else _dist_to_segments(q[sel], self.chord_sets[k].chords)
                d_hi[sel] = (
                    self.high.distance(q[sel]) if k + 1 >= m else _dist_to_segments(q[sel], self.chord_sets[k + 1].chords)
                )
            tot = d_lo + d_hi
            w = np.where(tot > 0, d_lo / np.where(tot > 0, tot, 1.0), 0.5)
            w = np.where(np.isinf(d_lo) & np.isinf(d_hi), 0.5, np.where(np.isinf(d_hi), 0.0, np.where(np.isinf(d_lo), 1.0, w)))
            out[rest] = t_lo + w * (t_hi - t_lo)
        out = np.clip(out, self.fmin, self.fmax)
        return out[0] if single else out


def _count_hits(starts: np.ndarray, ends: np.ndarray, chords: np.ndarray) -> np.ndarray:
    """Number of chords met by each segment (start, end]; contacts at ``end`` count."""
    p = starts[:, None, :]
    r = (ends - starts)[:, None, :]
    q = chords[None, :, 0, :]
    s = (chords[:, 1, :] - chords[:, 0, :])[None]
    rxs = r[..., 0] * s[..., 1] - r[..., 1] * s[..., 0]
    qp = q - p
    with np.errstate(divide="ignore", invalid="ignore"):
        tt = (qp[..., 0] * s[..., 1] - qp[..., 1] * s[..., 0]) / rxs
        uu = (qp[..., 0] * r[..., 1] - qp[..., 1] * r[..., 0]) / rxs
    eps = 1e-12
    hit = (np.abs(rxs) > 1e-300) & (tt > eps) & (tt <= 1 + 1e-9) & (uu >= -eps) & (uu <= 1 + eps)
    return hit.sum(axis=1)


def _thread_count(requested: Optional[int]) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("LGLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def solve(f: BoundaryDatum, config: SolverConfig = SolverConfig(), force: bool = False) -> LevelSolution:
    """Build the level solution; inadmissible data need ``force`` (diagnostic mode)."""
    report = check(f)
    warnings = []
    diagnostic = not report.admissible
    if diagnostic:
        if not force:
            raise SolverError(f"data are {report.verdict}; rerun with force for diagnostic output")
        warnings.append(f"diagnostic mode: {report.verdict}")
        log.warning("solving inadmissible data in diagnostic mode (%s)", report.verdict)
    fmin, fmax = f.fmin, f.fmax
    if fmax - fmin <= f.tol_val:
        return LevelSolution(
            f.polygon, f, np.empty(0), (), (), _boundary_set(f, fmin), _boundary_set(f, fmax), diagnostic, report, tuple(warnings)
        )
    flats = [v for v in flat_values(f) if fmin + f.tol_val < v < fmax - f.tol_val]
    edges = np.union1d(np.linspace(fmin, fmax, config.levels + 1), flats)
    eta = config.flat_offset_rel * (fmax - fmin)
    specs = [(lo, hi, hi - lo) for lo, hi in zip(edges[:-1], edges[1:])]
    # zero-width levels hugging each plateau pin the flat regions to their value
    offsets = []
    for v in flat_values(f):
        if v > fmin + 2 * eta:
            offsets.append((v, -1))
        if v < fmax - 2 * eta:
            offsets.append((v, 1))

    def build_mid(spec):
        lo, hi, w = spec
        t, lc = _regular_level(f, lo, hi)
        cs = build_level_boundary(f, t, lc)
        return LevelChordSet(cs.t, cs.chords, cs.arcs, cs.total_length, w)

    def build_offset(item):
        v, side = item
        for mult in (1.0, 2.0, 3.0, 5.0):
            lc = level_crossings(f, v + side * mult * eta)
            if lc.regular:
                return build_level_boundary(f, lc.t, lc)
        raise NonRegularLevel(f"no regular level next to the plateau value {v:.12g}")

    n_threads = _thread_count(config.threads)
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            mids = list(ex.map(build_mid, specs))
            offs = list(ex.map(build_offset, offsets))
    else:
        mids = [build_mid(s) for s in specs]
        offs = [build_offset(t) for t in offsets]
    sets = sorted(mids + offs, key=lambda c: c.t)
    levels = np.array([c.t for c in sets])
    fat = ()
    if config.use_fat_regions and not diagnostic:
        fat = tuple(fat_regions(f, report))
    sol = LevelSolution(
        f.polygon, f, levels, tuple(sets), fat, _boundary_set(f, fmin), _boundary_set(f, fmax), diagnostic, report, tuple(warnings)
    )
    if diagnostic or not report.plateaus:
        return sol
    return replace(sol, plateau_regions=tuple(plateau_regions(sol)))


def _plateau_arcs(f: BoundaryDatum, plateaus) -> list[tuple[float, float, float]]:
    """Merge side-local plateaus into maximal boundary arcs (start, end, value)."""
    P = f.polygon
    tol = 1e-9 * P.perimeter
    arcs = sorted((float(P.starts[p.side] + p.s0), float(P.starts[p.side] + p.s1), p.value) for p in plateaus)
    merged: list[list[float]] = []
    for a, b, v in arcs:
        if merged and a - merged[-1][1] <= tol and abs(v - merged[-1][2]) <= f.tol_val:
            merged[-1][1] = b
        else:
            merged.append([a, b, v])
    if len(merged) > 1 and P.perimeter - merged[-1][1] + merged[0][0] <= tol and abs(merged[0][2] - merged[-1][2]) <= f.tol_val:
        last = merged.pop()
        merged[0][0] = last[0] - P.perimeter
    return [tuple(m) for m in merged]


def plateau_regions(sol: LevelSolution, tol_rel: float = 1e-3) -> list[FatLevelRegion]:
    """Hulls of plateau arcs at a local extremum, kept when the level sets confirm them."""
    f, P = sol.datum, sol.polygon
    if f.range <= f.tol_val or not len(sol.levels):
        return []
    out = []
    for a, b, v in _plateau_arcs(f, sol.report.plateaus):
        if b - a >= P.perimeter - 1e-9 * P.perimeter:
            continue
        d = 1e-6 * P.perimeter
        before, after = f.eval(np.mod(a - d, P.perimeter)), f.eval(np.mod(b + d, P.perimeter))
        if before < v and after < v:
            kind = "max"
        elif before > v and after > v:
            kind = "min"
        else:
            continue
        inner = [P.vertices[i] for i in range(P.n_sides) if a < P.starts[i] < b or a < P.starts[i] - P.perimeter < b]
        pts = [P.point_at(np.mod(a, P.perimeter)), *inner, P.point_at(np.mod(b, P.perimeter))]
        hull = convex_hull(pts)
        if len(hull) < 3:
            continue
        c = hull.mean(axis=0)
        probe = np.vstack([c, c + 0.9 * (hull - c)])
        if np.all(np.abs(sol.evaluate(probe) - v) <= tol_rel * f.range):
            out.append(FatLevelRegion((), hull, float(v), kind))
    return out


def evaluate(sol: LevelSolution, x) -> np.ndarray:
    return sol.evaluate(x)


def tv_coarea(sol: LevelSolution) -> float:
    """Sum of level width times chord length, in level order."""
    return math.fsum(c.width * c.total_length for c in sol.chord_sets)


def rasterize(sol: LevelSolution, spec: GridSpec) -> GridField:
    mask = spec.mask(sol.polygon)
    pts = spec.centers()[mask]
    values = np.full((spec.ny, spec.nx), np.nan)
    if len(pts) == 0:
        # a single coarse cell may miss the polygon; fall back to the nearest interior point
        ctr = spec.centers().reshape(-1, 2)
        c = np.mean(sol.polygon.vertices, axis=0)
        k = int(np.argmin(np.linalg.norm(ctr - c, axis=1)))
        mask = np.zeros((spec.ny, spec.nx), dtype=bool)
        mask.flat[k] = True
        values.flat[k] = float(sol.evaluate(c))
        return GridField(spec, values, mask)
    if len(sol.levels) == 0:
        values[mask] = sol.fmin
    else:
        values[mask] = sol.evaluate(pts)
    return GridField(spec, values, mask)


# -- truncation -------------------------------------------------------------------


def truncate(f: BoundaryDatum, segment, anchor, value: float) -> BoundaryDatum:
    """Cut away the closed half-plane through ``segment`` containing ``anchor``;
    the new side carries the constant ``value``."""
    Q = half_plane_cut(f.polygon, HalfPlane(tuple(map(tuple, segment)), tuple(anchor)))
    return cut_datum(f, Q, value)


def truncate_accumulation(source, depth: int) -> list[tuple[ConvexPolygon, BoundaryDatum]]:
    """Truncations 1..depth of an accumulating family.

    ``source`` is either a family with an ``instance(k)`` generator or a plain
    instance, whose truncations are all the instance itself.
    """
    if depth < 1:
        raise SolverError("truncation depth must be >= 1")
    gen = getattr(source, "instance", None)
    if gen is None:
        return [(source.polygon, source.datum)] * depth
    out = []
    for k in range(1, depth + 1):
        try:
            inst = gen(k)
        except (IndexError, StopIteration) as exc:
            raise SolverError(f"generator exhausted at depth {k}") from exc
        out.append((inst.polygon, inst.datum))
    return out


def stability_check(sol_n: LevelSolution, sol_next: LevelSolution, n_grid: int = 64) -> float:
    """Sup of |u_next - u_n| over an n_grid^2 cell-centre grid inside the smaller domain."""
    spec = GridSpec.with_cells(sol_n.polygon, n_grid)
    pts = spec.centers()[spec.mask(sol_n.polygon)]
    if not np.all(sol_next.polygon.contains(pts, tol=1e-9)):
        raise SolverError("the first domain is not contained in the second")
    return float(np.max(np.abs(sol_next.evaluate(pts) - sol_n.evaluate(pts))))
