import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lglab.geometry import (
    ConvexPolygon,
    GeometryError,
    HalfPlane,
    convex_hull,
    half_plane_cut,
    project_to_convex,
    project_to_convex_many,
    segments_intersect,
    side_strip,
    strictly_convexify,
)

SQUARE = ConvexPolygon.from_points([(0, 0), (1, 0), (1, 1), (0, 1)])


def regular(n, r=1.0):
    a = 2 * math.pi * np.arange(n) / n
    return ConvexPolygon.from_points(np.c_[r * np.cos(a), r * np.sin(a)])


@st.composite
def convex_polygons(draw):
    n = draw(st.integers(3, 9))
    angles = sorted(draw(st.lists(st.floats(0, 2 * math.pi, exclude_max=True), min_size=n, max_size=n, unique=True)))
    gaps = np.diff(angles + [angles[0] + 2 * math.pi])
    if gaps.min() < 0.05 or gaps.max() > math.pi - 0.05:
        angles = list(2 * math.pi * np.arange(n) / n)
    radii = draw(st.floats(0.5, 3.0))
    pts = np.c_[radii * np.cos(angles), 0.7 * radii * np.sin(angles)]
    return ConvexPolygon.from_points(convex_hull(pts))


class TestPolygon:
    def test_rejects_nonconvex_with_index(self):
        with pytest.raises(GeometryError) as ei:
            ConvexPolygon.from_points([(0, 0), (1, 0), (0.5, 0.1), (1, 1), (0, 1)])
        assert ei.value.vertex_index == 2

    def test_rejects_clockwise(self):
        with pytest.raises(GeometryError):
            ConvexPolygon.from_points([(0, 0), (0, 1), (1, 1), (1, 0)])

    def test_merges_collinear(self):
        P = ConvexPolygon.from_points([(0, 0), (0.5, 0), (1, 0), (1, 1), (0, 1)])
        assert P.n_sides == 4

    def test_too_few_vertices(self):
        with pytest.raises(GeometryError):
            ConvexPolygon.from_points([(0, 0), (1, 0)])

    def test_measures(self):
        assert SQUARE.perimeter == pytest.approx(4.0)
        assert SQUARE.area == pytest.approx(1.0)
        assert SQUARE.diameter == pytest.approx(math.sqrt(2))

    def test_arc_parametrization(self):
        for s in np.linspace(0, 4, 17, endpoint=False):
            p = SQUARE.point_at(s)
            j, loc = SQUARE.locate(p)
            assert SQUARE.starts[j] + loc == pytest.approx(s)


class TestProjection:
    def test_fixed_point_on_boundary(self):
        assert np.allclose(project_to_convex((0, 0), SQUARE), (0, 0))

    def test_face(self):
        assert np.allclose(project_to_convex((2, 0.5), SQUARE), (1, 0.5))

    def test_vertex(self):
        assert np.allclose(project_to_convex((2, 2), SQUARE), (1, 1))

    def test_inside_is_identity(self):
        assert np.allclose(project_to_convex((0.3, 0.7), SQUARE), (0.3, 0.7))

    def test_lipschitz_many_pairs(self):
        rng = np.random.default_rng(1)
        P = regular(7, 1.5)
        a = rng.uniform(-4, 4, (100_000, 2))
        b = a + rng.normal(scale=rng.choice([0.01, 0.5, 3.0], (100_000, 1)), size=(100_000, 2))
        pa, pb = project_to_convex_many(a, P), project_to_convex_many(b, P)
        lhs = np.linalg.norm(pa - pb, axis=1)
        rhs = np.linalg.norm(a - b, axis=1)
        assert np.all(lhs <= rhs + 1e-12)

    @settings(max_examples=40, deadline=None)
    @given(convex_polygons(), st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
    def test_projection_is_nearest(self, P, p):
        q = project_to_convex(p, P)
        assert P.contains(q[None], tol=1e-9)[0]
        _, _, _, d = P.nearest_boundary(p)
        inside = P.contains(np.array([p]), tol=0)[0]
        assert np.linalg.norm(q - np.asarray(p)) == pytest.approx(0.0 if inside else d, abs=1e-9)


class TestSegments:
    def test_crossing(self):
        r = segments_intersect(((0, 0), (1, 1)), ((0, 1), (1, 0)))
        assert r.kind == "point" and np.allclose(r.witness, (0.5, 0.5))

    def test_parallel_disjoint(self):
        assert not segments_intersect(((0, 0), (1, 0)), ((0, 1), (1, 1)))

    def test_overlap(self):
        r = segments_intersect(((0, 0), (2, 0)), ((1, 0), (3, 0)))
        assert r.kind == "overlap"
        assert np.allclose(sorted(map(tuple, r.witness)), [(1, 0), (2, 0)])

    def test_touching_endpoints(self):
        assert segments_intersect(((0, 0), (1, 0)), ((1, 0), (2, 1))).kind == "point"

    def test_degenerate(self):
        with pytest.raises(GeometryError):
            segments_intersect(((0, 0), (0, 0)), ((0, 1), (1, 1)))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-3, 3), min_size=8, max_size=8), st.floats(0.1, 100))
    def test_verdict_scale_invariant(self, c, k):
        a = np.array(c).reshape(4, 2)
        if min(np.linalg.norm(a[1] - a[0]), np.linalg.norm(a[3] - a[2])) < 1e-3:
            return
        r1 = segments_intersect(a[:2], a[2:])
        r2 = segments_intersect(k * a[:2], k * a[2:])
        assert r1.kind == r2.kind


class TestHalfPlaneCut:
    def test_square_half(self):
        Q = half_plane_cut(SQUARE, HalfPlane(((0, 0.5), (1, 0.5)), (0.5, 0)))
        assert Q.area == pytest.approx(0.5)
        assert sorted(map(tuple, np.round(Q.vertices, 12))) == [(0, 0.5), (0, 1), (1, 0.5), (1, 1)]

    def test_triangle_corner(self):
        T = ConvexPolygon.from_points([(0, 0), (2, 0), (0, 2)])
        Q = half_plane_cut(T, HalfPlane(((1, 0), (0, 1)), (0, 0)))
        assert sorted(map(tuple, np.round(Q.vertices, 12))) == [(0, 1), (0, 2), (1, 0), (2, 0)]
        assert Q.area == pytest.approx(T.area - 0.5, rel=1e-12)

    def test_full_side_rejected(self):
        with pytest.raises(GeometryError):
            half_plane_cut(SQUARE, HalfPlane(((0, 0), (1, 0)), (0.5, -1)))

    def test_endpoint_off_boundary(self):
        with pytest.raises(GeometryError):
            half_plane_cut(SQUARE, HalfPlane(((0.2, 0.2), (1, 0.5)), (0.5, 0)))

    @settings(max_examples=40, deadline=None)
    @given(convex_polygons(), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    def test_area_balance(self, P, u, v):
        s0 = u * P.perimeter / 2
        s1 = P.perimeter / 2 + v * P.perimeter / 2
        p, q = P.point_at(s0), P.point_at(s1)
        if np.linalg.norm(p - q) < 1e-3:
            return
        mid = P.point_at(0.5 * (s0 + s1))  # boundary point on one side of the cut
        H = HalfPlane((p, q), mid)
        try:
            Q = half_plane_cut(P, H)
        except GeometryError:
            return  # cut along a side or a sliver
        kept = np.asarray(P.vertices)[H.side_value(P.vertices) < 0]
        cap_pts = np.vstack([np.asarray(P.vertices)[H.side_value(P.vertices) >= 0], [p, q]])
        cap = convex_hull(cap_pts)
        cap_area = 0.5 * abs(np.sum(cap[:, 0] * np.roll(cap[:, 1], -1) - np.roll(cap[:, 0], -1) * cap[:, 1]))
        assert len(kept) + 2 >= 3
        assert Q.area == pytest.approx(P.area - cap_area, rel=1e-12, abs=1e-12)


class TestStrip:
    def test_square_bottom(self):
        S = side_strip(SQUARE, 0)
        assert [np.linalg.norm(w[1] - w[0]) for w in S.walls] == pytest.approx([1.0, 1.0])

    def test_triangle_acute_corner(self):
        T = ConvexPolygon.from_points([(0, 0), (4, 0), (0, 3)])
        S = side_strip(T, 0)
        assert np.linalg.norm(S.left_wall[1] - S.left_wall[0]) == pytest.approx(3.0)
        assert S.right_wall is None

    def test_hexagon_symmetric(self):
        H = regular(6)
        for j in range(6):
            S = side_strip(H, j)
            lens = [np.linalg.norm(w[1] - w[0]) for w in S.walls]
            assert len(lens) == 2 and lens[0] == pytest.approx(lens[1])

    @settings(max_examples=40, deadline=None)
    @given(convex_polygons())
    def test_walls_perpendicular_and_inside(self, P):
        for j in range(P.n_sides):
            for w in side_strip(P, j).walls:
                d = w[1] - w[0]
                assert abs(np.dot(d, P.directions[j])) <= 1e-9 * max(1, np.linalg.norm(d))
                mids = w[0] + np.linspace(0, 1, 7)[:, None] * d
                assert P.contains(mids, tol=1e-9).all()


class TestStrictlyConvex:
    def test_square_heights(self):
        B = strictly_convexify(SQUARE, 10)
        for i in range(4):
            assert 0 < B.height(i) <= 0.1
        mid = B.arc_point(0, 0.5)
        assert mid[1] < 0 and -mid[1] <= 0.1

    @settings(max_examples=25, deadline=None)
    @given(convex_polygons())
    def test_hausdorff_decreases(self, P):
        prev = math.inf
        for n in (1, 2, 4, 8, 16, 32, 64):
            d = strictly_convexify(P, n).hausdorff_to_polygon
            assert 0 < d <= 1.0 / n + 1e-15
            assert d < prev
            prev = d

    @settings(max_examples=25, deadline=None)
    @given(convex_polygons(), st.integers(1, 20))
    def test_nested_and_contains_domain(self, P, n):
        outer, inner = strictly_convexify(P, n), strictly_convexify(P, 2 * n)
        pts, _, _ = inner.sample(400)
        assert outer.contains(pts, tol=1e-9).all()
        rng = np.random.default_rng(0)
        w = rng.dirichlet(np.ones(P.n_sides), 200)
        assert outer.contains(w @ P.vertices).all()

    def test_arcs_join_at_vertices(self):
        B = strictly_convexify(regular(5), 3)
        P = B.polygon
        for i in range(P.n_sides):
            end = B.arc_point(i, P.lengths[i])
            start = B.arc_point((i + 1) % P.n_sides, 0.0)
            assert np.allclose(end, start)


def test_convex_hull_drops_interior():
    pts = [(0, 0), (2, 0), (1, 1), (2, 2), (0, 2), (1, 0.5)]
    h = convex_hull(pts)
    assert len(h) == 4
