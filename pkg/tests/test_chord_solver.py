import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lglab import fixtures
from lglab.chord_solver import (
    NonRegularLevel,
    SolverConfig,
    SolverError,
    build_level_boundary,
    min_noncrossing_matching,
    rasterize,
    solve,
    stability_check,
    tv_coarea,
    truncate_accumulation,
)
from lglab.datum import BoundaryDatum
from lglab.grid import GridSpec


@pytest.fixture(scope="module")
def rect():
    return solve(fixtures.rect_hump(4, 1).datum)


def brute_matching(pts):
    """Min total length over all crossing-free parity-respecting perfect matchings."""
    n = len(pts)
    best = math.inf

    def rec(free, pairs):
        nonlocal best
        if not free:
            for (a, b), (c, d) in itertools.combinations(pairs, 2):
                if a < c < b < d or c < a < d < b:
                    return
            best = min(best, sum(np.linalg.norm(pts[i] - pts[j]) for i, j in pairs))
            return
        i = free[0]
        for j in free[1:]:
            if (j - i) % 2:
                rec([k for k in free if k not in (i, j)], pairs + [(i, j)])

    rec(list(range(n)), [])
    return best


def interior_points(P, n, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(P.n_sides), n)
    return w @ np.asarray(P.vertices)


class TestMatching:
    def test_empty(self):
        assert min_noncrossing_matching(np.empty((0, 2))) == (0.0, [])

    def test_odd_rejected(self):
        with pytest.raises(SolverError):
            min_noncrossing_matching(np.zeros((3, 2)))

    def test_square_picks_short_pairs(self):
        pts = np.array([(0, 0), (4, 0), (4, 1), (0, 1)], dtype=float)
        total, pairs = min_noncrossing_matching(pts)
        assert total == pytest.approx(2.0) and pairs == [(0, 3), (1, 2)]

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**31))
    def test_against_catalan_enumeration(self, half, seed):
        rng = np.random.default_rng(seed)
        ang = np.sort(rng.uniform(0, 2 * math.pi, 2 * half))
        pts = np.c_[np.cos(ang) * rng.uniform(1, 3), np.sin(ang)]
        total, pairs = min_noncrossing_matching(pts)
        assert total == pytest.approx(brute_matching(pts), rel=1e-12, abs=1e-12)
        got = sum(np.linalg.norm(pts[i] - pts[j]) for i, j in pairs)
        assert got == pytest.approx(total, rel=1e-12)


class TestLevelBoundary:
    def test_vertical_chords_marginal(self):
        cs = build_level_boundary(fixtures.rect_hump(4, 2.5).datum, 12.0)
        assert len(cs) == 2 and cs.total_length == pytest.approx(4.0)
        assert np.allclose(sorted(abs(cs.chords[:, 0, 0])), [2.0, 2.0])

    def test_just_below_cap(self):
        cs = build_level_boundary(fixtures.rect_hump(4, 1).datum, 6.99)
        xs = np.sort(cs.chords[:, :, 0].ravel())
        assert xs == pytest.approx([-math.sqrt(9.01)] * 2 + [math.sqrt(9.01)] * 2)

    def test_flat_level_rejected(self):
        with pytest.raises(NonRegularLevel):
            build_level_boundary(fixtures.InfiniteHumps().instance(4).datum, -0.25)


class TestRectangle:
    def test_closed_form(self, rect):
        f = rect.datum
        pts = interior_points(f.polygon, 1000, seed=11)
        err = np.abs(rect.evaluate(pts) - fixtures.rect_closed_form(4, 1, pts[:, 0]))
        assert err.max() <= 1e-3 * f.range

    def test_known_values(self, rect):
        assert rect.evaluate(np.array([[0.0, 0.0], [3.5, 0.25]])) == pytest.approx([7.0, 3.75], abs=1e-3)

    def test_tv(self, rect):
        assert tv_coarea(rect) == pytest.approx(28.0, rel=1e-6)

    @pytest.mark.parametrize("lam", [0.5, 1.5, 1.9])
    def test_tv_family(self, lam):
        sol = solve(fixtures.rect_hump(4, lam).datum, SolverConfig(levels=128))
        assert tv_coarea(sol) == pytest.approx(4 * fixtures.rect_cap_value(4, lam), rel=1e-6)

    def test_symmetry(self, rect):
        pts = interior_points(rect.polygon, 500, seed=2)
        u = rect.evaluate(pts)
        assert np.allclose(rect.evaluate(pts * [-1, 1]), u, atol=1e-9)
        assert np.allclose(rect.evaluate(pts * [1, -1]), u, atol=1e-9)

    def test_fat_region(self, rect):
        (reg,) = rect.fat
        assert reg.value == pytest.approx(7.0)
        assert sorted(map(tuple, np.round(reg.vertices, 12))) == [(-3, -1), (-3, 1), (3, -1), (3, 1)]

    def test_inadmissible_needs_force(self):
        with pytest.raises(SolverError):
            solve(fixtures.dcc_violation(6, 1).datum)
        sol = solve(fixtures.dcc_violation(6, 1).datum, SolverConfig(levels=64), force=True)
        assert sol.diagnostic and sol.warnings and not sol.fat


class TestInvariants:
    @pytest.mark.parametrize(
        "inst",
        [fixtures.rect_hump(4, 1), fixtures.InfiniteHumps().instance(4), fixtures.c2_tight()],
        ids=["rect", "wedge", "triangle"],
    )
    def test_maximum_principle_and_nesting(self, inst):
        sol = solve(inst.datum, SolverConfig(levels=128), force=True)
        spec = GridSpec.with_cells(sol.polygon, 128)
        pts = spec.centers()[spec.mask(sol.polygon)]
        u = sol.evaluate(pts)
        f = sol.datum
        assert np.all((u >= f.fmin - 1e-12) & (u <= f.fmax + 1e-12))
        prev = np.ones(len(pts), dtype=bool)
        for j in range(len(sol.levels)):
            cur = sol.member(j, pts)
            assert not np.any(cur & ~prev), j
            prev = cur

    def test_threads_identical(self):
        f = fixtures.InfiniteHumps().instance(3).datum
        a = solve(f, SolverConfig(levels=64, threads=1))
        b = solve(f, SolverConfig(levels=64, threads=4))
        assert np.array_equal(a.levels, b.levels)
        pts = interior_points(f.polygon, 300)
        assert np.array_equal(a.evaluate(pts), b.evaluate(pts))

    def test_rasterize(self, rect):
        spec = GridSpec.with_cells(rect.polygon, 16)
        g = rasterize(rect, spec)
        pts = spec.centers()[g.mask]
        assert np.array_equal(g.values[g.mask], rect.evaluate(pts))
        assert np.all(np.isnan(g.values[~g.mask]))


class TestAccumulation:
    def test_fourth_truncation_regions(self):
        sol = solve(fixtures.InfiniteHumps().instance(4).datum)
        vals = sorted(r.value for r in (*sol.fat, *sol.plateau_regions))
        assert vals == pytest.approx([-0.5, -0.25, 1 / 3, 1.0])

    def test_stability(self):
        ih = fixtures.InfiniteHumps()
        (_, f3), (_, f4) = truncate_accumulation(ih, 4)[2:]
        a, b = solve(f3), solve(f4)
        assert stability_check(a, b) <= 1e-6 * f3.range

    def test_stability_detects_mismatch(self):
        ih = fixtures.InfiniteHumps()
        f3, f4 = ih.instance(3).datum, ih.instance(4).datum
        d = f4.to_dict()
        for side in d["sides"]:
            for p in side["pieces"]:
                p["coeffs"] = [2 * c for c in p["coeffs"]]
        scaled = BoundaryDatum.from_dict(f4.polygon, d)
        assert stability_check(solve(f3), solve(scaled)) > 1e-2 * f3.range

    def test_depth_validated(self):
        with pytest.raises(SolverError):
            truncate_accumulation(fixtures.InfiniteHumps(), 0)
