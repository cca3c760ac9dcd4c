import math

import numpy as np
import pytest

from lglab import fixtures
from lglab.chord_solver import SolverConfig, solve
from lglab.datum import constant_datum, cut_datum, datum_from_vertex_values
from lglab.geometry import ConvexPolygon, HalfPlane, half_plane_cut
from lglab.grid import GridError, GridSpec
from lglab.tv_oracle import (
    OracleError,
    brute_force_level,
    build_grid,
    compare,
    crofton_line_factor,
    crofton_weights,
    integer_cut_cost,
    min_cut_level,
    oracle_levels,
    solve_oracle,
    threshold_stack,
    trace_deviation,
)

SQ = ConvexPolygon.from_points([(0, 0), (1, 0), (1, 1), (0, 1)])


def window():
    """Right end of the marginal rectangle, closed by a constant side at 12."""
    f = fixtures.rect_hump(4, 2.5).datum
    Q = half_plane_cut(f.polygon, HalfPlane(((2, -1), (2, 1)), (0, 0)))
    return cut_datum(f, Q, 12.0)


class TestWeights:
    def test_four_neighbour(self):
        assert crofton_weights([(1, 0), (0, 1)], 0.5) == pytest.approx([math.pi / 8] * 2)

    @pytest.mark.parametrize("conn, axis", [(4, 0.7854), (8, 0.9481), (16, 0.9862)])
    def test_line_factors(self, conn, axis):
        assert crofton_line_factor(conn, 0.0) == pytest.approx(axis, abs=1e-4)

    def test_four_neighbour_diagonal_ratio(self):
        r = crofton_line_factor(4, math.pi / 4) / crofton_line_factor(4, 0.0)
        assert r == pytest.approx(math.sqrt(2))

    def test_sixteen_is_nearly_isotropic(self):
        th = np.linspace(0, math.pi, 181)
        fac = np.array([crofton_line_factor(16, t) for t in th])
        assert fac.max() / fac.min() < 1.03


class TestStraightInterfaces:
    @pytest.mark.parametrize("conn", [4, 8, 16])
    def test_axis_ramp(self, conn):
        D = solve_oracle(datum_from_vertex_values(SQ, [0, 1, 1, 0]), 1 / 64, conn, 64)
        assert D.tv == pytest.approx(crofton_line_factor(conn, 0.0), rel=0.015)

    def test_sixteen_close_to_true_length(self):
        D = solve_oracle(datum_from_vertex_values(SQ, [0, 1, 1, 0]), 1 / 64, 16, 64)
        assert D.tv == pytest.approx(1.0, rel=0.03)

    def test_four_neighbour_diagonal_costs_more(self):
        a = solve_oracle(datum_from_vertex_values(SQ, [0, 1, 1, 0]), 1 / 64, 4, 64)
        d = solve_oracle(datum_from_vertex_values(SQ, [0, 1, 2, 1]), 1 / 64, 4, 64)
        # exact TV is 1 and sqrt(2); the lattice inflates the diagonal by another sqrt(2)
        assert d.tv / a.tv == pytest.approx(2.0, rel=0.02)


class TestCuts:
    def test_constant_datum(self):
        D = solve_oracle(constant_datum(SQ, 3.0), 1 / 16, 16, 8)
        assert D.tv == 0.0
        assert np.all(D.field.values[D.field.mask] == 3.0)

    def test_all_boundary_above_level(self):
        G = build_grid(SQ, datum_from_vertex_values(SQ, [1, 2, 3, 2]), 1 / 16)
        r = min_cut_level(G, 0.5)
        assert r.source.all() and r.cost == 0.0

    def test_duality(self):
        D = solve_oracle(fixtures.rect_hump(4, 1).datum, 1 / 8, 16, 32)
        assert all(fv == cap for fv, cap in D.duality)

    def test_brute_force_window(self):
        f = window()
        spec = GridSpec(2.0, -1.0, 2 / 7, 7, 7)
        G = build_grid(f.polygon, f, spec.h, 16, spec)
        assert G.n_free == 25
        rng = np.random.default_rng(5)
        for t in [12.0, *rng.uniform(f.fmin, f.fmax, 4)]:
            best, union = brute_force_level(G, t)
            r = min_cut_level(G, t)
            assert integer_cut_cost(G, r.source) == best
            assert np.array_equal(r.source, union)

    def test_brute_force_size_guard(self):
        G = build_grid(SQ, datum_from_vertex_values(SQ, [0, 1, 1, 0]), 1 / 16)
        with pytest.raises(OracleError):
            brute_force_level(G, 0.5)

    def test_empty_grid(self):
        with pytest.raises(GridError):
            build_grid(SQ, constant_datum(SQ, 0.0), 4.0)


class TestStack:
    def test_levels_split_at_plateaus(self):
        t, w = oracle_levels(fixtures.rect_hump(4, 2.5).datum, 8)
        assert np.all(np.diff(t) > 0) and w.sum() == pytest.approx(13.75)

    def test_nesting_and_tv_identity(self):
        D = solve_oracle(fixtures.rect_hump(4, 1).datum, 1 / 8, 16, 64)
        assert not np.any(D.sets[1:] & ~D.sets[:-1])
        assert D.tv == pytest.approx(D.edge_tv(), rel=1e-12)

    def test_maximum_principle(self):
        f = fixtures.InfiniteHumps().instance(3).datum
        D = solve_oracle(f, f.polygon.diameter / 64, 16, 64)
        u = D.u_nodes
        assert u.min() >= f.fmin and u.max() <= f.fmax + 1e-12

    def test_shift_equivariance(self):
        G = build_grid(SQ, datum_from_vertex_values(SQ, [0, 1, 3, 1]), 1 / 16)
        t, w = oracle_levels(datum_from_vertex_values(SQ, [0, 1, 3, 1]), 32)
        a = threshold_stack(G, t, w, 0.0)
        G2 = build_grid(SQ, datum_from_vertex_values(SQ, [5, 6, 8, 6]), 1 / 16)
        b = threshold_stack(G2, t + 5, w, 5.0)
        assert np.allclose(b.u_nodes, a.u_nodes + 5)

    def test_levels_must_increase(self):
        G = build_grid(SQ, datum_from_vertex_values(SQ, [0, 1, 1, 0]), 1 / 8)
        with pytest.raises(OracleError):
            threshold_stack(G, np.array([0.5, 0.2]), np.array([0.5, 0.5]), 0.0)


class TestTrace:
    def test_consistency_violation_flags(self):
        f = fixtures.dcc_violation(6, 1).datum
        c = solve_oracle(f, 1 / 8, 16, 256)
        r = solve_oracle(f, 1 / 16, 16, 256)
        td = trace_deviation(c, f, r)
        assert td.flag and td.sup > 10 * td.threshold

    def test_admissible_rectangle_clear(self):
        f = fixtures.rect_hump(4, 1).datum
        td = trace_deviation(solve_oracle(f, 1 / 8, 16, 256), f, solve_oracle(f, 1 / 16, 16, 256))
        assert not td.flag


class TestCompare:
    def test_agrees_with_solver(self):
        f = fixtures.rect_hump(4, 1).datum
        D = solve_oracle(f, 1 / 16, 16, 64)
        cmp = compare(D, solve(f, SolverConfig(levels=128)))
        assert cmp.linf <= 0.1 * f.range
        assert cmp.tv_gap < 0.05

    def test_grid_mismatch(self):
        D = solve_oracle(fixtures.rect_hump(4, 1).datum, 1 / 8, 16, 16)
        S = solve(fixtures.rect_hump(3, 0.5).datum, SolverConfig(levels=16))
        with pytest.raises(OracleError):
            compare(D, S)
