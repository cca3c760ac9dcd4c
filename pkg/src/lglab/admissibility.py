"""Checkers for side monotonicity, the hump-distance inequality, segment
ordering, data consistency, structural guards and the modulus bound.

Every verdict carries a geometric witness so a failing report can be read
without re-running anything.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .datum import (
    BoundaryDatum,
    BoundaryPoint,
    Hump,
    analyze_humps,
    modulus_estimate,
    side_runs,
)
from .geometry import TOL_GEOM, ConvexPolygon, segments_intersect, side_strip

RIGHT_ANGLE_TOL = 1e-9


# -- verdict records ------------------------------------------------------------


@dataclass(frozen=True)
class SideMonotone:
    side: int
    ok: bool
    witness: Optional[tuple] = None  # location of a strict interior extremum


@dataclass(frozen=True)
class HumpInequality:
    side: int
    hump_index: int
    ok: bool
    margin: float
    dist_a: float
    dist_b: float
    off_side: bool


@dataclass(frozen=True)
class SegmentOrder:
    ok: bool
    pair: Optional[tuple] = None  # hump indices
    segments: Optional[tuple] = None
    point: Optional[tuple] = None
    shared_pairs: tuple = ()


@dataclass(frozen=True)
class Consistency:
    hump_index: int
    ok: bool
    chosen_y: Optional[BoundaryPoint] = None
    chosen_z: Optional[BoundaryPoint] = None
    violation: Optional[tuple] = None  # offending arc point
    reason: str = ""


@dataclass(frozen=True)
class GuardReport:
    side: int
    status: str  # "pass" | "skipped" | "inconsistent"
    hump_count: int
    wall_hits: tuple = ()
    note: str = ""


@dataclass(frozen=True)
class AdmissibilityReport:
    sides_c1: tuple
    humps: tuple
    c2: tuple
    side_c2: tuple
    opc: SegmentOrder
    dcc: tuple
    guards: tuple
    plateaus: tuple
    admissible: bool
    reasons: tuple

    @property
    def verdict(self) -> str:
        return "admissible" if self.admissible else "inadmissible(" + ",".join(self.reasons) + ")"

    def to_dict(self) -> dict:
        def pt(p):
            return None if p is None else [float(p[0]), float(p[1])]

        return {
            "verdict": self.verdict,
            "admissible": self.admissible,
            "reasons": list(self.reasons),
            "sides": [
                {
                    "side": m.side,
                    "c1": m.ok,
                    "c1_witness": pt(m.witness),
                    "c2": self.side_c2[m.side],
                    "humps": sum(1 for h in self.humps if h.side == m.side),
                }
                for m in self.sides_c1
            ],
            "humps": [h.to_dict() for h in self.humps],
            "c2": [
                {
                    "hump": c.hump_index,
                    "ok": c.ok,
                    "margin": c.margin if math.isfinite(c.margin) else None,
                    "dist_a": c.dist_a if math.isfinite(c.dist_a) else None,
                    "dist_b": c.dist_b if math.isfinite(c.dist_b) else None,
                    "off_side": c.off_side,
                }
                for c in self.c2
            ],
            "opc": {
                "ok": self.opc.ok,
                "pair": list(self.opc.pair) if self.opc.pair else None,
                "segments": [[pt(s[0]), pt(s[1])] for s in self.opc.segments] if self.opc.segments else None,
                "point": pt(self.opc.point),
                "shared_pairs": [list(p) for p in self.opc.shared_pairs],
            },
            "dcc": [
                {
                    "hump": d.hump_index,
                    "ok": d.ok,
                    "y": list(d.chosen_y.point) if d.chosen_y else None,
                    "z": list(d.chosen_z.point) if d.chosen_z else None,
                    "violation": pt(d.violation),
                    "reason": d.reason,
                }
                for d in self.dcc
            ],
            "guards": [
                {"side": g.side, "status": g.status, "humps": g.hump_count, "wall_hits": list(g.wall_hits), "note": g.note}
                for g in self.guards
            ],
            "plateaus": [{"side": p.side, "s0": p.s0, "s1": p.s1, "value": p.value} for p in self.plateaus],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"verdict: {self.verdict}"]
        for m in self.sides_c1:
            c2 = self.side_c2[m.side]
            n = sum(1 for h in self.humps if h.side == m.side)
            lines.append(f"side {m.side}: monotone={'yes' if m.ok else 'no'} humps={n} hump-inequality={'yes' if c2 else 'no'}")
        for i, (h, c) in enumerate(zip(self.humps, self.c2)):
            lines.append(
                f"hump {i} ({h.kind} {h.value:.6g}) side {h.side} [{_fmt(h.a.point)} - {_fmt(h.b.point)}]: "
                f"margin {c.margin:.6g}{'' if c.off_side else ' (matches on own side)'}"
            )
        if self.opc.ok:
            lines.append("segment order: ok")
        else:
            lines.append(f"segment order: humps {self.opc.pair} cross at {_fmt(self.opc.point)}")
        for d in self.dcc:
            if d.ok:
                lines.append(f"consistency hump {d.hump_index}: ok with y={_fmt(d.chosen_y.point)} z={_fmt(d.chosen_z.point)}")
            else:
                where = f" at {_fmt(d.violation)}" if d.violation is not None else ""
                lines.append(f"consistency hump {d.hump_index}: fails{where} ({d.reason})")
        for g in self.guards:
            lines.append(f"guard side {g.side}: {g.status} {g.note}".rstrip())
        return "\n".join(lines)


def _fmt(p) -> str:
    return "(" + ", ".join(f"{float(v):.6g}" for v in p) + ")"


# -- side monotonicity -------------------------------------------------------------


def check_C1(f: BoundaryDatum, side: int) -> SideMonotone:
    runs = [r for r in side_runs(f, side) if r.direction != 0]
    dirs = {r.direction for r in runs}
    if len(dirs) <= 1:
        return SideMonotone(side, True)
    for r0, r1 in zip(runs[:-1], runs[1:]):
        if r0.direction != r1.direction:
            xy = f.polygon.point_on_side(side, 0.5 * (r0.s1 + r1.s0))
            return SideMonotone(side, False, (float(xy[0]), float(xy[1])))
    raise AssertionError("unreachable")


# -- hump inequality ------------------------------------------------------------


def _on_side(P: ConvexPolygon, bp: BoundaryPoint, side: int) -> bool:
    a, b = P.side(side)
    d = abs(float(np.dot(bp.xy - a, P.normals[side])))
    return d <= TOL_GEOM * max(1.0, P.diameter)


def check_C2(f: BoundaryDatum, h: Hump, index: int = -1) -> HumpInequality:
    P = f.polygon
    length = h.length
    margin = length - (h.dist_a + h.dist_b)
    cands = h.candidates_y + h.candidates_z
    off = bool(cands) and not any(_on_side(P, c, h.side) for c in cands)
    ok = (not h.degenerate) and math.isfinite(margin) and margin > 1e-12 * length and off
    return HumpInequality(h.side, index, ok, margin, h.dist_a, h.dist_b, off)


# -- segment order ------------------------------------------------------------


def _in_hump(P: ConvexPolygon, bp: BoundaryPoint, h: Hump) -> bool:
    if not _on_side(P, bp, h.side):
        return False
    s = float(np.dot(bp.xy - P.vertices[h.side], P.directions[h.side]))
    tol = TOL_GEOM * max(1.0, P.diameter)
    return h.a.s - tol <= s <= h.b.s + tol


def mutually_matched(P: ConvexPolygon, h1: Hump, h2: Hump) -> bool:
    """Every candidate of each hump lies on the other hump's closed interval."""
    c1 = h1.candidates_y + h1.candidates_z
    c2 = h2.candidates_y + h2.candidates_z
    if not c1 or not c2 or h1.value != h2.value and abs(h1.value - h2.value) > 1e-12 * max(1.0, abs(h1.value)):
        return False
    return all(_in_hump(P, c, h2) for c in c1) and all(_in_hump(P, c, h1) for c in c2)


def _segments(h: Hump):
    for y in h.candidates_y:
        for z in h.candidates_z:
            yield (h.a.xy, y.xy), (h.b.xy, z.xy)


def check_OPC(f: BoundaryDatum, humps) -> SegmentOrder:
    P = f.polygon
    shared = []
    for i, j in itertools.combinations(range(len(humps)), 2):
        h1, h2 = humps[i], humps[j]
        if mutually_matched(P, h1, h2):
            shared.append((i, j))
            continue
        for segs1 in _segments(h1):
            for segs2 in _segments(h2):
                for s1 in segs1:
                    for s2 in segs2:
                        r = segments_intersect(s1, s2)
                        if r:
                            w = r.witness if r.kind == "point" else r.witness[0]
                            return SegmentOrder(
                                False,
                                (i, j),
                                (tuple(map(tuple, s1)), tuple(map(tuple, s2))),
                                (float(w[0]), float(w[1])),
                                tuple(shared),
                            )
    return SegmentOrder(True, shared_pairs=tuple(shared))


# -- data consistency -----------------------------------------------------------


def _arc_between(P: ConvexPolygon, y: BoundaryPoint, z: BoundaryPoint, h: Hump):
    """Counterclockwise arc joining y and z that avoids the hump.

    Returns (start point, end point, start arc, end arc); the end arc may
    exceed the perimeter.
    """
    per = P.perimeter
    mid = 0.5 * (h.a.arc + h.b.arc)
    start, end = y, z
    if (mid - y.arc) % per <= (z.arc - y.arc) % per:
        start, end = z, y
    return start, end, start.arc, start.arc + (end.arc - start.arc) % per


def arc_extremes(f: BoundaryDatum, lo: float, hi: float) -> tuple[float, float, float, float]:
    """(min, arc of min, max, arc of max) of f over the arc [lo, hi] (hi may wrap)."""
    P = f.polygon
    per = P.perimeter
    best_min, best_max = (math.inf, lo), (-math.inf, lo)
    for j, _, p, off in f.pieces():
        for shift in (0.0, per):
            g0, g1 = off + p.s0 + shift, off + p.s1 + shift
            u0, u1 = max(g0, lo), min(g1, hi)
            if u1 < u0 - 1e-15:
                continue
            xs = [u0, u1]
            c = p.critical_offsets() + g0
            xs += [x for x in c if u0 < x < u1]
            vals = p(np.array(xs) - g0 + p.s0)
            k = int(np.argmin(vals))
            if vals[k] < best_min[0]:
                best_min = (float(vals[k]), xs[k] % per)
            k = int(np.argmax(vals))
            if vals[k] > best_max[0]:
                best_max = (float(vals[k]), xs[k] % per)
    return best_min[0], best_min[1], best_max[0], best_max[1]


def outward_sign(f: BoundaryDatum, bp: BoundaryPoint, direction: int) -> int:
    """Sign of f(x) - f(bp) just beyond bp when walking along the arc in ``direction``.

    A constant stretch at the value of ``bp`` is walked over first.
    """
    P = f.polygon
    j, s = bp.side, bp.s
    for _ in range(sum(len(ps) for ps in f.sides) + 2):
        sgn = f.derivative_sign(j, s, direction)
        if sgn != 0:
            return sgn
        # constant piece: jump to its far end
        ps = f.sides[j]
        tol = TOL_GEOM * max(1.0, P.lengths[j])
        if direction > 0:
            if s >= P.lengths[j] - tol:
                j, s = (j + 1) % P.n_sides, 0.0
                continue
            k = next(i for i, p in enumerate(ps) if s < p.s1 - tol)
            s = ps[k].s1
        else:
            if s <= tol:
                j = (j - 1) % P.n_sides
                s = float(P.lengths[j])
                continue
            k = next(i for i in range(len(ps) - 1, -1, -1) if s > ps[i].s0 + tol)
            s = ps[k].s0
    return 0


def check_DCC(f: BoundaryDatum, h: Hump, index: int = -1) -> Consistency:
    P = f.polygon
    if not h.candidates_y or not h.candidates_z:
        return Consistency(index, False, reason="no matched points")
    tol = f.tol_val
    want = -1 if h.kind == "max" else 1
    first_fail = None
    pairs = sorted(itertools.product(h.candidates_y, h.candidates_z), key=lambda yz: (yz[0].arc, yz[1].arc))
    for y, z in pairs:
        start, end, lo, hi = _arc_between(P, y, z, h)
        fmin, amin, fmax, amax = arc_extremes(f, lo, hi)
        if h.kind == "max" and fmin < h.value - tol:
            first_fail = first_fail or (y, z, P.point_at(amin), "arc drops below the hump value")
            continue
        if h.kind == "min" and fmax > h.value + tol:
            first_fail = first_fail or (y, z, P.point_at(amax), "arc rises above the hump value")
            continue
        # walking away from the arc: backwards at its start, forwards at its end
        s_out = outward_sign(f, start, -1)
        e_out = outward_sign(f, end, +1)
        if s_out != want or e_out != want:
            bad = start if s_out != want else end
            first_fail = first_fail or (y, z, bad.xy, "not strictly monotone away from the matched point")
            continue
        return Consistency(index, True, y, z)
    y, z, w, why = first_fail
    return Consistency(index, False, y, z, (float(w[0]), float(w[1])), why)


# -- structural guards -------------------------------------------------------------


def _non_acute(P: ConvexPolygon, i: int) -> bool:
    return P.interior_angle(i) >= math.pi / 2 - RIGHT_ANGLE_TOL


def structural_guards(f: BoundaryDatum, humps, preconditions: bool) -> list[GuardReport]:
    P = f.polygon
    out = []
    for j in range(P.n_sides):
        n = sum(1 for h in humps if h.side == j)
        if not (_non_acute(P, j) and _non_acute(P, (j + 1) % P.n_sides)):
            out.append(GuardReport(j, "skipped", n, note="acute corner: finitely many humps not guaranteed"))
            continue
        if not preconditions:
            out.append(GuardReport(j, "skipped", n, note="only claimed when every hump passes the inequality and segments are ordered"))
            continue
        strip = side_strip(P, j)
        tol = 1e-9 * max(1.0, P.diameter)
        hits = []
        for wall in strip.walls:
            count = 0
            for h in humps:
                if h.side != j:
                    continue
                y = h.chosen_y or (h.candidates_y[0] if h.candidates_y else None)
                z = h.chosen_z or (h.candidates_z[0] if h.candidates_z else None)
                for end, partner in ((h.a, y), (h.b, z)):
                    if partner is None:
                        continue
                    r = segments_intersect(tuple(wall), (end.xy, partner.xy))
                    # contacts on the boundary itself are not inside the domain
                    if r and (r.kind == "overlap" or P.nearest_boundary(r.witness)[3] > tol):
                        count += 1
            hits.append(count)
        bad = any(c > 1 for c in hits)
        out.append(GuardReport(j, "inconsistent" if bad else "pass", n, tuple(hits)))
    return out


# -- full report ----------------------------------------------------------------


def check(f: BoundaryDatum) -> AdmissibilityReport:
    P = f.polygon
    analysis = analyze_humps(f)
    humps = list(analysis.humps)
    c1 = tuple(check_C1(f, j) for j in range(P.n_sides))
    c2 = tuple(check_C2(f, h, i) for i, h in enumerate(humps))
    side_c2 = tuple(all(c.ok for c in c2 if c.side == j) for j in range(P.n_sides))
    opc = check_OPC(f, humps)
    dcc = tuple(check_DCC(f, h, i) for i, h in enumerate(humps))
    humps = [replace(h, chosen_y=d.chosen_y, chosen_z=d.chosen_z) if d.ok else h for h, d in zip(humps, dcc)]
    reasons = []
    if not all(m.ok or side_c2[m.side] for m in c1):
        reasons.append("C2")
    if not opc.ok:
        reasons.append("OPC")
    if not all(d.ok for d in dcc):
        reasons.append("DCC")
    guards = structural_guards(f, humps, preconditions=all(c.ok for c in c2) and opc.ok)
    return AdmissibilityReport(
        c1, tuple(humps), c2, side_c2, opc, dcc, tuple(guards), analysis.plateaus, not reasons, tuple(reasons)
    )


# -- modulus bound --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModulusBound:
    K: int
    A: float
    B: float
    r_grid: np.ndarray
    omega_f: np.ndarray

    def omega(self, r):
        """Modulus of the datum, interpolated on the geometric grid and constant past its end."""
        r = np.asarray(r, dtype=float)
        return np.interp(r, np.concatenate([[0.0], self.r_grid]), np.concatenate([[0.0], self.omega_f]))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.K * self.omega(r * self.B + self.A * np.sqrt(np.maximum(r, 0.0)))


def bound_constants(P: ConvexPolygon) -> tuple[float, float]:
    n = P.n_sides
    min_sin_gamma = min(math.sin(P.interior_angle(i)) for i in range(n))
    A = math.sqrt(P.diameter) / math.sqrt(min_sin_gamma)
    sines = []
    for i, j in itertools.combinations(range(n), 2):
        a1, b1 = P.side(i)
        a2, b2 = P.side(j)
        u1, u2 = P.directions[i], P.directions[j]
        cross = abs(float(u1[0] * u2[1] - u1[1] * u2[0]))
        if cross <= 1e-12:
            dist = abs(float(np.dot(a1 - a2, P.normals[j])))
            proj = [float(np.dot(p - a2, u2)) for p in (a1, b1, a2, b2)]
            diam = max(proj) - min(proj)
            sines.append(math.sin(math.atan2(dist, diam)))
        elif abs(j - i) % n not in (1, n - 1):
            d1 = min(_pt_seg(a1, a2, b2), _pt_seg(b1, a2, b2))
            d2 = min(_pt_seg(a2, a1, b1), _pt_seg(b2, a1, b1))
            p21 = abs(float(np.dot(b1 - a1, u2)))
            p12 = abs(float(np.dot(b2 - a2, u1)))
            r1 = d1 / p21 if p21 > 0 else math.inf
            r2 = d2 / p12 if p12 > 0 else math.inf
            sines.append(min(1.0, r1, r2))
    B = 1.0 / min(sines) if sines else 1.0
    return A, B


def _pt_seg(p, a, b) -> float:
    d = b - a
    t = min(max(float(np.dot(p - a, d)) / float(np.dot(d, d)), 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


def modulus_bound(P: ConvexPolygon, f: BoundaryDatum, points: int = 1024) -> ModulusBound:
    A, B = bound_constants(P)
    r_grid = P.diameter * np.geomspace(1e-6, 1.0, points)
    w = modulus_estimate(f, r_grid)
    return ModulusBound(P.n_sides, A, B, r_grid, w)
