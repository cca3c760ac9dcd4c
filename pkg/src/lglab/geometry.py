"""Planar primitives on convex polygons.

All coincidence tests use ``TOL_GEOM`` in domain length units; domains are
expected to have diameter of order one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TOL_GEOM = 1e-9


class GeometryError(ValueError):
    """Invalid polygon, segment or cut."""

    def __init__(self, message: str, vertex_index: Optional[int] = None):
        super().__init__(message)
        self.vertex_index = vertex_index


def _cross(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def _as_point(p) -> np.ndarray:
    return np.asarray(p, dtype=float).reshape(2)


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Convex polygon with counterclockwise vertices.

    Side ``j`` runs from vertex ``j`` to vertex ``j + 1``; local arc length on a
    side is measured from its counterclockwise start.
    """

    vertices: np.ndarray
    tol: float = TOL_GEOM
    lengths: np.ndarray = field(init=False, repr=False)
    starts: np.ndarray = field(init=False, repr=False)
    directions: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("a polygon needs at least 3 vertices")
        n = len(v)
        for i in range(n):
            if np.linalg.norm(v[(i + 1) % n] - v[i]) <= self.tol:
                raise GeometryError(f"vertices {i} and {(i + 1) % n} coincide", i)
        for i in range(n):
            e1 = v[i] - v[i - 1]
            e2 = v[(i + 1) % n] - v[i]
            c = _cross(e1, e2)
            if c <= self.tol * np.linalg.norm(e1) * np.linalg.norm(e2):
                raise GeometryError(f"polygon is not strictly convex at vertex {i}", i)
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.linalg.norm(edges, axis=1)
        dirs = edges / lengths[:, None]
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "starts", np.concatenate([[0.0], np.cumsum(lengths)[:-1]]))
        object.__setattr__(self, "directions", dirs)
        # inward normal is the left normal for a ccw polygon
        object.__setattr__(self, "normals", np.stack([-dirs[:, 1], dirs[:, 0]], axis=1))

    @classmethod
    def from_points(cls, points: Sequence, tol: float = TOL_GEOM) -> "ConvexPolygon":
        """Build a polygon, dropping repeated points and merging collinear edges.

        Raises GeometryError carrying the index (in the input) of the vertex
        where convexity or orientation fails.
        """
        pts = [_as_point(p) for p in points]
        idx = list(range(len(pts)))
        # drop consecutive duplicates
        keep_p, keep_i = [], []
        for p, i in zip(pts, idx):
            if keep_p and np.linalg.norm(p - keep_p[-1]) <= tol:
                continue
            keep_p.append(p)
            keep_i.append(i)
        if len(keep_p) > 1 and np.linalg.norm(keep_p[0] - keep_p[-1]) <= tol:
            keep_p.pop()
            keep_i.pop()
        changed = True
        while changed and len(keep_p) >= 3:
            changed = False
            n = len(keep_p)
            for k in range(n):
                e1 = keep_p[k] - keep_p[k - 1]
                e2 = keep_p[(k + 1) % n] - keep_p[k]
                c = _cross(e1, e2)
                scale = np.linalg.norm(e1) * np.linalg.norm(e2)
                if abs(c) <= tol * scale:
                    if float(np.dot(e1, e2)) < 0:
                        raise GeometryError(f"edge folds back at vertex {keep_i[k]}", keep_i[k])
                    del keep_p[k]
                    del keep_i[k]
                    changed = True
                    break
        if len(keep_p) < 3:
            raise GeometryError("degenerate polygon (fewer than 3 non-collinear vertices)")
        n = len(keep_p)
        for k in range(n):
            e1 = keep_p[k] - keep_p[k - 1]
            e2 = keep_p[(k + 1) % n] - keep_p[k]
            if _cross(e1, e2) < 0:
                raise GeometryError(
                    f"polygon is not convex counterclockwise at vertex {keep_i[k]}", keep_i[k]
                )
        return cls(np.array(keep_p), tol=tol)

    # -- basic measures -------------------------------------------------
    @property
    def n_sides(self) -> int:
        return len(self.vertices)

    @property
    def perimeter(self) -> float:
        return float(self.lengths.sum())

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def diameter(self) -> float:
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(0)
        hi = self.vertices.max(0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def side(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        j %= self.n_sides
        return self.vertices[j], self.vertices[(j + 1) % self.n_sides]

    def interior_angle(self, i: int) -> float:
        """Interior angle at vertex ``i``."""
        n = self.n_sides
        a = self.vertices[i - 1] - self.vertices[i]
        b = self.vertices[(i + 1) % n] - self.vertices[i]
        return math.atan2(abs(_cross(a, b)), float(np.dot(a, b)))

    # -- arc length ------------------------------------------------------
    def point_on_side(self, j: int, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.vertices[j] + s[..., None] * self.directions[j]

    def point_at(self, s) -> np.ndarray:
        """Point at global arc length ``s`` (wrapped into [0, perimeter))."""
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        j = np.clip(np.searchsorted(self.starts, s, side="right") - 1, 0, self.n_sides - 1)
        loc = s - self.starts[j]
        return self.vertices[j] + loc[..., None] * self.directions[j]

    def global_arc(self, j: int, s: float) -> float:
        return float(self.starts[j] + s)

    def side_of_arc(self, s: float) -> tuple[int, float]:
        s = float(np.mod(s, self.perimeter))
        j = int(np.clip(np.searchsorted(self.starts, s, side="right") - 1, 0, self.n_sides - 1))
        return j, s - float(self.starts[j])

    # -- containment and projection --------------------------------------
    def signed_distances(self, pts) -> np.ndarray:
        """Signed distance of points to every side line; positive inside. Shape (..., n)."""
        pts = np.asarray(pts, dtype=float)
        return np.einsum("...k,jk->...j", pts, self.normals) - np.einsum(
            "jk,jk->j", self.vertices, self.normals
        )

    def contains(self, pts, tol: Optional[float] = None):
        """Closed containment (with tolerance); vectorized over leading axes."""
        tol = self.tol if tol is None else tol
        d = self.signed_distances(pts)
        return np.all(d >= -tol, axis=-1)

    def nearest_boundary(self, p) -> tuple[int, float, np.ndarray, float]:
        """Nearest boundary point of ``p``: (side, local s, point, distance)."""
        p = _as_point(p)
        rel = p - self.vertices
        s = np.clip(np.einsum("jk,jk->j", rel, self.directions), 0.0, self.lengths)
        q = self.vertices + s[:, None] * self.directions
        d = np.linalg.norm(p - q, axis=1)
        j = int(np.argmin(d))
        return j, float(s[j]), q[j], float(d[j])

    def nearest_boundary_many(self, pts) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        rel = pts[:, None, :] - self.vertices[None]
        s = np.clip(np.einsum("mjk,jk->mj", rel, self.directions), 0.0, self.lengths)
        q = self.vertices[None] + s[..., None] * self.directions[None]
        d = np.linalg.norm(pts[:, None, :] - q, axis=2)
        j = np.argmin(d, axis=1)
        r = np.arange(len(pts))
        return j, s[r, j], q[r, j], d[r, j]

    def locate(self, p, tol: Optional[float] = None) -> tuple[int, float]:
        """Side and local arc length of a boundary point."""
        tol = self.tol if tol is None else tol
        j, s, _, d = self.nearest_boundary(p)
        if d > max(tol, tol * self.diameter):
            raise GeometryError(f"point {tuple(p)} is not on the boundary (distance {d:.3g})")
        return j, s

    def ray_exit(self, p, direction) -> float:
        """Largest t >= 0 with p + t*direction in the closed polygon (p inside)."""
        p = _as_point(p)
        u = _as_point(direction)
        t_max = math.inf
        for j in range(self.n_sides):
            nd = float(np.dot(self.normals[j], u))
            if nd < -1e-15:
                slack = float(np.dot(self.normals[j], p - self.vertices[j]))
                t_max = min(t_max, slack / -nd)
        return max(t_max, 0.0)

    def ray_exit_many(self, pts, direction) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        u = _as_point(direction)
        nd = self.normals @ u
        slack = self.signed_distances(pts)
        with np.errstate(divide="ignore"):
            t = np.where(nd < -1e-15, slack / np.where(nd < -1e-15, -nd, 1.0), np.inf)
        return np.maximum(t.min(axis=1), 0.0)


def project_to_convex(p, P: ConvexPolygon) -> np.ndarray:
    """Metric projection of ``p`` onto the closed polygon."""
    p = _as_point(p)
    if P.contains(p, tol=0.0):
        return p.copy()
    return P.nearest_boundary(p)[2].copy()


def project_to_convex_many(pts, P: ConvexPolygon) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    out = pts.copy()
    outside = ~P.contains(pts, tol=0.0)
    if outside.any():
        out[outside] = P.nearest_boundary_many(pts[outside])[2]
    return out


# -- segments -----------------------------------------------------------------


@dataclass(frozen=True)
class Intersection:
    kind: str  # "empty" | "point" | "overlap"
    witness: Optional[np.ndarray] = None  # point, or (2, 2) segment for overlap

    def __bool__(self) -> bool:
        return self.kind != "empty"


def segments_intersect(s1, s2, tol: float = TOL_GEOM) -> Intersection:
    """Classify the intersection of two closed segments.

    The tolerance is relative to the longer segment so the verdict is
    invariant under dilation.
    """
    p, q = (_as_point(x) for x in s1)
    r, t = (_as_point(x) for x in s2)
    d1, d2 = q - p, t - r
    l1, l2 = float(np.linalg.norm(d1)), float(np.linalg.norm(d2))
    if l1 <= 0 or l2 <= 0:
        raise GeometryError("degenerate (zero-length) segment")
    eps = tol * max(l1, l2)
    denom = _cross(d1, d2)
    if abs(denom) <= tol * l1 * l2:
        # parallel: collinear iff r lies on the line through s1
        if abs(_cross(d1, r - p)) / l1 > eps:
            return Intersection("empty")
        u = d1 / l1
        a0, a1 = sorted((float(np.dot(r - p, u)), float(np.dot(t - p, u))))
        lo, hi = max(0.0, a0), min(l1, a1)
        if hi < lo - eps:
            return Intersection("empty")
        if hi - lo <= eps:
            return Intersection("point", p + 0.5 * (lo + hi) * u)
        return Intersection("overlap", np.array([p + lo * u, p + hi * u]))
    w = r - p
    a = _cross(w, d2) / denom
    b = _cross(w, d1) / denom
    ta, tb = eps / l1, eps / l2
    if -ta <= a <= 1 + ta and -tb <= b <= 1 + tb:
        a = min(max(a, 0.0), 1.0)
        return Intersection("point", p + a * d1)
    return Intersection("empty")


def point_segment_distance(pts, a, b) -> np.ndarray:
    """Distance from points (..., 2) to segment [a, b]."""
    pts = np.asarray(pts, dtype=float)
    a, b = _as_point(a), _as_point(b)
    d = b - a
    L2 = float(np.dot(d, d))
    if L2 == 0.0:
        return np.linalg.norm(pts - a, axis=-1)
    t = np.clip(((pts - a) @ d) / L2, 0.0, 1.0)
    return np.linalg.norm(pts - (a + t[..., None] * d), axis=-1)


# -- half planes and cuts ----------------------------------------------------


@dataclass(frozen=True)
class HalfPlane:
    """Closed half-plane bounded by the line through ``segment``, on the anchor's side."""

    segment: tuple
    anchor: tuple

    def __post_init__(self):
        p, q = (_as_point(x) for x in self.segment)
        a = _as_point(self.anchor)
        L = float(np.linalg.norm(q - p))
        if L <= TOL_GEOM:
            raise GeometryError("half-plane boundary segment is degenerate")
        if abs(_cross(q - p, a - p)) / L <= TOL_GEOM * max(1.0, L):
            raise GeometryError("anchor lies on the half-plane boundary line")

    def side_value(self, pts) -> np.ndarray:
        """Positive on the anchor's side."""
        p, q = (_as_point(x) for x in self.segment)
        a = _as_point(self.anchor)
        d = q - p
        sgn = np.sign(_cross(d, a - p))
        pts = np.asarray(pts, dtype=float)
        return sgn * ((pts[..., 1] - p[1]) * d[0] - (pts[..., 0] - p[0]) * d[1]) / np.linalg.norm(d)


def half_plane_cut(P: ConvexPolygon, H: HalfPlane) -> ConvexPolygon:
    """Remove the closed half-plane ``H`` from ``P``; the cut segment becomes a side."""
    p, q = (_as_point(x) for x in H.segment)
    L = float(np.linalg.norm(q - p))
    for e in (p, q):
        if P.nearest_boundary(e)[3] > P.tol * max(1.0, L) + P.tol:
            raise GeometryError(f"cut endpoint {tuple(e)} is not on the boundary")
    vals = H.side_value(P.vertices)
    eps = P.tol * max(L, 1e-300)
    keep = vals < -eps
    if not keep.any():
        raise GeometryError("cut removes the whole polygon")
    if (vals < eps).all():
        raise GeometryError("cut removes nothing (zero-area cap)")
    out = []
    n = P.n_sides
    for i in range(n):
        a, b = P.vertices[i], P.vertices[(i + 1) % n]
        va, vb = vals[i], vals[(i + 1) % n]
        if va < -eps:
            out.append(a)
        elif abs(va) <= eps:
            out.append(a)
            continue
        if (va < -eps and vb > eps) or (va > eps and vb < -eps):
            lam = va / (va - vb)
            out.append(a + lam * (b - a))
    # snap the two new vertices exactly onto the segment endpoints
    snapped = []
    for v in out:
        for e in (p, q):
            if np.linalg.norm(v - e) <= 1e-7 * max(L, 1e-300):
                v = e.copy()
        snapped.append(v)
    return ConvexPolygon.from_points(snapped, tol=P.tol)


# -- strips ------------------------------------------------------------------


@dataclass(frozen=True)
class Strip:
    side_index: int
    left_wall: Optional[np.ndarray]  # (2, 2) segment or None when empty
    right_wall: Optional[np.ndarray]

    @property
    def walls(self) -> list:
        return [w for w in (self.left_wall, self.right_wall) if w is not None]


def side_strip(P: ConvexPolygon, j: int) -> Strip:
    """Walls of the strip of perpendiculars over side ``j``."""
    a, b = P.side(j)
    n = P.normals[j]
    walls = []
    for e in (a, b):
        t = P.ray_exit(e, n)
        walls.append(None if t <= P.tol * max(1.0, P.diameter) else np.array([e, e + t * n]))
    return Strip(j, walls[0], walls[1])


# -- strictly convex approximation ------------------------------------------


@dataclass(frozen=True, eq=False)
class StrictConvexBoundary:
    """Outward quadratic bulges ``kappa_i(x) = c_i x (x - d_i)`` over every side.

    In side-local coordinates (x along the side, y inward) the arc over side i
    is the graph of kappa_i, which is strictly convex and non-positive.
    """

    polygon: ConvexPolygon
    level: int
    curvatures: np.ndarray

    def height(self, i: int) -> float:
        d = self.polygon.lengths[i]
        return float(self.curvatures[i] * d * d / 4.0)

    @property
    def hausdorff_to_polygon(self) -> float:
        return max(self.height(i) for i in range(self.polygon.n_sides))

    def arc_point(self, i: int, x) -> np.ndarray:
        P = self.polygon
        x = np.asarray(x, dtype=float)
        y = self.curvatures[i] * x * (x - P.lengths[i])
        return P.vertices[i] + x[..., None] * P.directions[i] + y[..., None] * P.normals[i]

    def sample(self, m: int = 4096) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(points, side index, local x) for m points spread by side length."""
        P = self.polygon
        counts = np.maximum(1, np.round(m * P.lengths / P.perimeter).astype(int))
        pts, sides, xs = [], [], []
        for i, c in enumerate(counts):
            x = np.linspace(0.0, P.lengths[i], c, endpoint=False)
            pts.append(self.arc_point(i, x))
            sides.append(np.full(c, i))
            xs.append(x)
        return np.concatenate(pts), np.concatenate(sides), np.concatenate(xs)

    def contains(self, pts, tol: float = TOL_GEOM) -> np.ndarray:
        P = self.polygon
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        inside = P.contains(pts, tol=tol)
        for i in range(P.n_sides):
            rel = pts - P.vertices[i]
            x = rel @ P.directions[i]
            y = rel @ P.normals[i]
            d = P.lengths[i]
            cap = (x >= -tol) & (x <= d + tol) & (y <= tol) & (
                y >= self.curvatures[i] * x * (x - d) - tol
            )
            inside |= cap
        return inside


def strictly_convexify(P: ConvexPolygon, n: int) -> StrictConvexBoundary:
    """Level-n strictly convex outer approximation of ``P``.

    Support lines at vertices are the angle-bisector normals; the bulge slope
    at both ends of a side is the smaller endpoint slope divided by n, and the
    bulge height is clipped to 1/n.
    """
    if n < 1:
        raise ValueError("approximation level must be >= 1")
    K = P.n_sides
    # slope magnitude of the bisector support line in a side's frame: cot(gamma/2)
    cots = np.array([1.0 / math.tan(P.interior_angle(i) / 2.0) for i in range(K)])
    c = np.empty(K)
    for i in range(K):
        d = P.lengths[i]
        m = min(cots[i], cots[(i + 1) % K]) / n
        c[i] = min(m / d, 4.0 / (n * d * d))
    return StrictConvexBoundary(P, n, c)


def convex_hull(points) -> np.ndarray:
    """Counterclockwise hull vertices (monotone chain); collinear points dropped."""
    pts = sorted({(float(p[0]), float(p[1])) for p in np.asarray(points, dtype=float).reshape(-1, 2)})
    if len(pts) <= 2:
        return np.array(pts)

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(np.subtract(out[-1], out[-2]), np.subtract(p, out[-2])) <= 0:
                out.pop()
            out.append(p)
        return out

    lower, upper = half(pts), half(reversed(pts))
    return np.array(lower[:-1] + upper[:-1])
