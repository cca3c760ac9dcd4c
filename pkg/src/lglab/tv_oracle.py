"""Discrete total-variation minimizer by per-level minimum cuts.

Cells of a uniform grid inside the polygon are graph nodes; a one-cell ring
along the boundary is pinned to the datum.  Edge weights follow the
Cauchy-Crofton formula for the chosen stencil, so cut cost approximates
Euclidean interface length.  Levels are solved by divide and conquer: the
canonical (maximal) minimum cut at a middle level fixes the labels of half of
the nodes for every level above or below it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_array
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from .datum import BoundaryDatum
from .geometry import ConvexPolygon
from .grid import GridError, GridField, GridSpec

STENCILS = {
    4: [(1, 0), (0, 1)],
    8: [(1, 0), (0, 1), (1, 1), (1, -1)],
    16: [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)],
}
CAPACITY_BUDGET = 2**30
DEV_THRESHOLD = 0.02
DEFAULT_ORACLE_LEVELS = 256


class OracleError(RuntimeError):
    pass


def crofton_weights(stencil: Sequence[tuple[int, int]], h: float) -> np.ndarray:
    """Weight per stencil vector: h * dphi / (2 |v|), dphi the angular cell of v on [0, pi)."""
    v = np.asarray(stencil, dtype=float)
    phi = np.mod(np.arctan2(v[:, 1], v[:, 0]), math.pi)
    order = np.argsort(phi)
    ps = phi[order]
    nxt = np.roll(ps, -1)
    nxt[-1] += math.pi
    prv = np.roll(ps, 1)
    prv[0] -= math.pi
    dphi = np.empty(len(v))
    dphi[order] = 0.5 * (nxt - prv)
    return h * dphi / (2.0 * np.linalg.norm(v, axis=1))


def crofton_line_factor(connectivity: int, theta: float) -> float:
    """Cut cost per unit length of a straight interface of direction theta (continuum limit)."""
    st = STENCILS[connectivity]
    w = crofton_weights(st, 1.0)
    v = np.asarray(st, dtype=float)
    phi = np.arctan2(v[:, 1], v[:, 0])
    return float(np.sum(w * np.linalg.norm(v, axis=1) * np.abs(np.sin(theta - phi))))


@dataclass(frozen=True, eq=False)
class GridGraph:
    """Cell graph.  Pinned nodes are the boundary ring plus an exterior halo as
    wide as the stencil reach, so every free cell sees its full stencil."""

    spec: GridSpec
    connectivity: int
    mask: np.ndarray  # (ny, nx) cells with centre inside the domain
    cells: np.ndarray  # (M, 2) integer (row, col); halo cells may fall outside the grid window
    centers: np.ndarray  # (M, 2)
    inside: np.ndarray  # (M,) bool
    ring: np.ndarray  # (M,) bool: pinned nodes (ring and halo)
    pinned: np.ndarray  # (M,) datum value at the nearest boundary point
    boundary_arc: np.ndarray  # (M,) arc length of the nearest boundary point
    boundary_dist: np.ndarray  # (M,)
    edge_i: np.ndarray
    edge_j: np.ndarray
    weight: np.ndarray  # float weights
    capacity: np.ndarray  # integer weights used by the flow solver
    scale: float

    @property
    def n_nodes(self) -> int:
        return len(self.cells)

    @property
    def n_free(self) -> int:
        return int((~self.ring).sum())

    def first_layer(self) -> np.ndarray:
        """Free nodes with a 4-neighbour in the ring."""
        lookup = {(int(r), int(c)): k for k, (r, c) in enumerate(self.cells)}
        out = np.zeros(self.n_nodes, dtype=bool)
        for k in np.flatnonzero(~self.ring):
            r, c = self.cells[k]
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nb = lookup.get((int(r + dr), int(c + dc)))
                if nb is not None and self.ring[nb]:
                    out[k] = True
                    break
        return out


def build_grid(P: ConvexPolygon, f: BoundaryDatum, h: float, connectivity: int = 16, spec: Optional[GridSpec] = None) -> GridGraph:
    if connectivity not in STENCILS:
        raise OracleError("connectivity must be 4, 8 or 16")
    spec = spec or GridSpec.covering(P, h)
    st = STENCILS[connectivity]
    pad = max(max(abs(dx), abs(dy)) for dx, dy in st)
    mask = spec.mask(P)
    if not mask.any():
        raise GridError("grid too coarse: no cell centre inside the domain")
    ny, nx = mask.shape
    off = pad + 1  # one spare cell so neighbour lookups and rolls stay in bounds
    big = np.zeros((ny + 2 * off, nx + 2 * off), dtype=bool)
    big[off : off + ny, off : off + nx] = mask
    # exterior cells within stencil reach of the domain
    near = big.copy()
    for dy in range(-pad, pad + 1):
        for dx in range(-pad, pad + 1):
            near |= np.roll(np.roll(big, dy, 0), dx, 1)
    rows, cols = np.nonzero(near)
    M = len(rows)
    inside = big[rows, cols]
    idx = -np.ones(big.shape, dtype=int)
    idx[rows, cols] = np.arange(M)
    ring = ~inside
    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ring |= inside & ~big[rows + dr, cols + dc]
    if ring.all():
        raise GridError("grid too coarse: every cell lies in the boundary ring")
    cells = np.column_stack([rows - off, cols - off])
    centers = np.column_stack([spec.x0 + (cells[:, 1] + 0.5) * spec.h, spec.y0 + (cells[:, 0] + 0.5) * spec.h])
    jj, ss, _, dist = P.nearest_boundary_many(centers)
    arcs = P.starts[jj] + ss
    pinned = np.empty(M)
    for side in np.unique(jj):
        m = jj == side
        pinned[m] = f.value_on_side(int(side), ss[m])
    w_dir = crofton_weights(st, spec.h)
    H, W_ = big.shape
    I, J, W = [], [], []
    for (dx, dy), w in zip(st, w_dir):
        rr, cc = rows + dy, cols + dx
        ok = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W_)
        nb = np.full(M, -1)
        nb[ok] = idx[rr[ok], cc[ok]]
        keep = nb >= 0
        src = np.flatnonzero(keep)
        dst = nb[keep]
        # pairs of pinned nodes involving the halo never matter
        live = ~(ring[src] & ring[dst] & ~(inside[src] & inside[dst]))
        I.append(src[live])
        J.append(dst[live])
        W.append(np.full(int(live.sum()), w))
    I, J, W = np.concatenate(I), np.concatenate(J), np.concatenate(W)
    # worst case a node collects all its incident weights on a terminal arc
    scale = CAPACITY_BUDGET / max(4.0 * W.sum(), 1e-300)
    cap = np.maximum(1, np.rint(W * scale)).astype(np.int64)
    return GridGraph(spec, connectivity, mask, cells, centers, inside, ring, pinned, arcs, dist, I, J, W, cap, scale)


# -- single level cut -------------------------------------------------------------


@dataclass(frozen=True)
class CutResult:
    source: np.ndarray  # (M,) bool: membership in the superlevel set
    cost: float  # weighted interface length
    flow_value: int
    cut_capacity: int  # integer capacity of the cut in the contracted problem


def _solve_cut(G: GridGraph, t: float, undecided: np.ndarray, fixed_source: np.ndarray) -> CutResult:
    """Canonical maximal min cut at level t with nodes outside ``undecided`` fixed.

    Outside nodes are on the source side iff ``fixed_source``.  Ring nodes in
    ``undecided`` are pinned by their datum value.
    """
    M = G.n_nodes
    label = fixed_source.copy()  # provisional labels for forced nodes
    ring_u = undecided & G.ring
    label[ring_u] = G.pinned[ring_u] >= t
    free = undecided & ~G.ring
    nf = int(free.sum())
    source = label.copy()
    source[free] = False
    flow_value = 0
    cut_cap = 0
    if nf:
        local = -np.ones(M, dtype=np.int64)
        local[free] = np.arange(nf)
        S, T = nf, nf + 1
        fi, fj = free[G.edge_i], free[G.edge_j]
        cap = G.capacity
        both = fi & fj
        a_i, a_j, a_c = local[G.edge_i[both]], local[G.edge_j[both]], cap[both]
        # one endpoint free: terminal arcs
        one_i = fi & ~fj
        one_j = fj & ~fi
        t_nodes = np.concatenate([local[G.edge_i[one_i]], local[G.edge_j[one_j]]])
        t_lab = np.concatenate([label[G.edge_j[one_i]], label[G.edge_i[one_j]]])
        t_cap = np.concatenate([cap[one_i], cap[one_j]])
        src_c = np.bincount(t_nodes[t_lab], weights=t_cap[t_lab], minlength=nf).astype(np.int64)
        snk_c = np.bincount(t_nodes[~t_lab], weights=t_cap[~t_lab], minlength=nf).astype(np.int64)
        # cancel the common part of both terminal arcs (it is cut either way)
        common = np.minimum(src_c, snk_c)
        src_c -= common
        snk_c -= common
        base = int(common.sum())
        nodes = np.arange(nf)
        hs, ht = src_c > 0, snk_c > 0
        rows = np.concatenate([a_i, a_j, np.full(int(hs.sum()), S), nodes[ht]])
        cols = np.concatenate([a_j, a_i, nodes[hs], np.full(int(ht.sum()), T)])
        caps = np.concatenate([a_c, a_c, src_c[hs], snk_c[ht]])
        if caps.size and caps.max() >= 2**31:
            raise OracleError("capacity overflow; coarsen the grid")
        C = csr_array((caps.astype(np.int32), (rows, cols)), shape=(nf + 2, nf + 2))
        C.sum_duplicates()
        res = maximum_flow(C, S, T, method="dinic")
        flow_value = int(res.flow_value) + base
        F = res.flow
        F = csr_array(F)
        # residual capacities on the union sparsity pattern
        R = (C.astype(np.int64) - F.astype(np.int64)).tocsr()
        R.data[R.data < 0] = 0
        R.eliminate_zeros()
        reach_t = np.zeros(nf + 2, dtype=bool)
        order = breadth_first_order(R.T.tocsr(), T, directed=True, return_predecessors=False)
        reach_t[order] = True
        src_local = ~reach_t[:nf]
        source[free] = src_local
        # integer capacity of the resulting cut in the contracted graph
        lab_local = src_local
        cut_cap = base
        cut_cap += int(a_c[lab_local[a_i] != lab_local[a_j]].sum())
        cut_cap += int(src_c[~lab_local].sum()) + int(snk_c[lab_local].sum())
    cost = float(G.weight[source[G.edge_i] != source[G.edge_j]].sum())
    return CutResult(source, cost, flow_value, cut_cap)


def min_cut_level(G: GridGraph, t: float) -> CutResult:
    """Canonical (maximal source side) minimum cut of the whole grid at level t."""
    none = np.zeros(G.n_nodes, dtype=bool)
    return _solve_cut(G, t, np.ones(G.n_nodes, dtype=bool), none)


def integer_cut_cost(G: GridGraph, source: np.ndarray) -> int:
    return int(G.capacity[source[G.edge_i] != source[G.edge_j]].sum())


def brute_force_level(G: GridGraph, t: float, max_free: int = 25) -> tuple[int, np.ndarray]:
    """Exhaustive minimum over all 2^n free labelings.

    Returns the integer cut cost and the union of all minimizers, which is the
    maximal minimum cut.  The cost is split into per-row tables so all
    labelings can be enumerated by broadcasting, one first-row value at a time.
    """
    free = np.flatnonzero(~G.ring)
    n = len(free)
    if n > max_free:
        raise OracleError(f"{n} free cells exceed the brute-force limit {max_free}")
    base = G.pinned >= t
    if n == 0:
        return integer_cut_cost(G, base), base.copy()
    row_of = G.cells[free, 0]
    rows = np.unique(row_of)
    groups = [free[row_of == r] for r in rows]
    pos = -np.ones(G.n_nodes, dtype=int)
    grp = -np.ones(G.n_nodes, dtype=int)
    for g, members in enumerate(groups):
        pos[members] = np.arange(len(members))
        grp[members] = g
    sizes = [len(m) for m in groups]
    codes = [np.arange(2**k) for k in sizes]
    bits = [((c[:, None] >> np.arange(k)) & 1).astype(bool) for c, k in zip(codes, sizes)]
    unary = [np.zeros(2**k, dtype=np.int64) for k in sizes]
    pair: dict = {}
    const = 0
    for i, j, c in zip(G.edge_i, G.edge_j, G.capacity):
        gi, gj = grp[i], grp[j]
        if gi < 0 and gj < 0:
            const += int(c) * int(base[i] != base[j])
        elif gi < 0 or gj < 0:
            g, k, other = (gj, j, i) if gi < 0 else (gi, i, j)
            unary[g] += int(c) * (bits[g][:, pos[k]] != base[other])
        elif gi == gj:
            unary[gi] += int(c) * (bits[gi][:, pos[i]] != bits[gi][:, pos[j]])
        else:
            if gi > gj:
                gi, gj, i, j = gj, gi, j, i
            tab = pair.setdefault((gi, gj), np.zeros((2**sizes[gi], 2**sizes[gj]), dtype=np.int64))
            tab += int(c) * (bits[gi][:, pos[i]][:, None] != bits[gj][:, pos[j]][None, :])
    m = len(groups)

    def axis(g, arr_1d):
        shape = [1] * (m - 1)
        shape[g - 1] = -1
        return arr_1d.reshape(shape)

    def axis2(g, h, arr_2d):
        shape = [1] * (m - 1)
        shape[g - 1] = arr_2d.shape[0]
        shape[h - 1] = arr_2d.shape[1]
        return arr_2d.reshape(shape)

    best = None
    union = np.zeros(n, dtype=bool)
    col = {k: q for q, k in enumerate(free)}
    for a0 in range(2**sizes[0]):
        total = np.full([2**k for k in sizes[1:]] or [1], const + int(unary[0][a0]), dtype=np.int64)
        for g in range(1, m):
            total = total + axis(g, unary[g])
        for (gi, gj), tab in pair.items():
            if gi == 0:
                total = total + axis(gj, tab[a0])
            else:
                total = total + axis2(gi, gj, tab)
        lo = int(total.min())
        if best is None or lo < best:
            best = lo
            union[:] = False
        if lo == best:
            hits = np.argwhere(total == lo)
            rowbits = [np.full(len(hits), a0)] + [hits[:, g - 1] for g in range(1, m)]
            for g in range(m):
                lab = bits[g][rowbits[g]].any(axis=0)
                for q, k in enumerate(groups[g]):
                    union[col[k]] |= lab[q]
    out = base.copy()
    out[free] = union
    return best, out


# -- threshold stack ------------------------------------------------------------


def oracle_levels(f: BoundaryDatum, n: int = DEFAULT_ORACLE_LEVELS) -> tuple[np.ndarray, np.ndarray]:
    """Midpoints and widths of n uniform value cells, split at plateau values."""
    from .chord_solver import flat_values

    if f.range <= f.tol_val:
        return np.empty(0), np.empty(0)
    flats = [v for v in flat_values(f) if f.fmin + f.tol_val < v < f.fmax - f.tol_val]
    edges = np.union1d(np.linspace(f.fmin, f.fmax, n + 1), flats)
    return 0.5 * (edges[:-1] + edges[1:]), np.diff(edges)


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    graph: GridGraph
    levels: np.ndarray
    widths: np.ndarray
    sets: np.ndarray  # (levels, M) bool
    cut_costs: np.ndarray
    tv: float
    field: GridField
    u_nodes: np.ndarray
    fmin: float
    duality: tuple = ()  # (flow value, cut capacity) per sub-solve

    @property
    def level_step(self) -> float:
        return float(self.widths.max()) if len(self.widths) else 0.0

    def edge_tv(self) -> float:
        """Weighted sum of jumps of the stacked field over grid edges."""
        u = self.u_nodes
        return float(np.sum(self.graph.weight * np.abs(u[self.graph.edge_i] - u[self.graph.edge_j])))


def threshold_stack(G: GridGraph, levels: np.ndarray, widths: np.ndarray, fmin: float) -> DiscreteSolution:
    levels = np.asarray(levels, dtype=float)
    widths = np.asarray(widths, dtype=float)
    if np.any(np.diff(levels) <= 0):
        raise OracleError("levels must be strictly increasing")
    m, M = len(levels), G.n_nodes
    sets = np.zeros((m, M), dtype=bool)
    costs = np.zeros(m)
    duality = []
    # explicit stack of (lo, hi, undecided, fixed_source) level ranges
    stack = [(0, m, np.ones(M, dtype=bool), np.zeros(M, dtype=bool))]
    while stack:
        lo, hi, und, fixed = stack.pop()
        if lo >= hi:
            continue
        mid = (lo + hi) // 2
        r = _solve_cut(G, levels[mid], und, fixed)
        sets[mid] = r.source
        costs[mid] = r.cost
        duality.append((r.flow_value, r.cut_capacity))
        inside = r.source
        stack.append((lo, mid, und & ~inside, fixed | (und & inside)))
        stack.append((mid + 1, hi, und & inside, fixed))
    if m > 1 and np.any(sets[1:] & ~sets[:-1]):
        raise OracleError("superlevel sets are not nested")
    u = fmin + (widths[:, None] * sets).sum(axis=0) if m else np.full(M, fmin)
    vals = np.full(G.mask.shape, np.nan)
    vals[G.cells[G.inside, 0], G.cells[G.inside, 1]] = u[G.inside]
    tv = math.fsum((widths * costs).tolist())
    return DiscreteSolution(G, levels, widths, sets, costs, tv, GridField(G.spec, vals, G.mask.copy()), u, fmin, tuple(duality))


def solve_oracle(
    f: BoundaryDatum, h: float, connectivity: int = 16, n_levels: int = DEFAULT_ORACLE_LEVELS, spec: Optional[GridSpec] = None
) -> DiscreteSolution:
    G = build_grid(f.polygon, f, h, connectivity, spec)
    t, w = oracle_levels(f, n_levels)
    return threshold_stack(G, t, w, f.fmin)


# -- trace deviation --------------------------------------------------------------


@dataclass(frozen=True)
class TraceDeviation:
    sup: float
    sup_fine: float
    profile: np.ndarray  # per boundary bin, coarse grid
    profile_fine: np.ndarray
    threshold: float
    flag: bool
    bins: np.ndarray  # bin indices that triggered the flag


def deviation_profile(D: DiscreteSolution, f: BoundaryDatum, n_bins: int = 64) -> np.ndarray:
    G = D.graph
    layer = G.first_layer()
    arcs = G.boundary_arc[layer]
    dev = np.abs(D.u_nodes[layer] - f.eval_point(G.centers[layer]))
    b = np.minimum((arcs / f.polygon.perimeter * n_bins).astype(int), n_bins - 1)
    prof = np.zeros(n_bins)
    np.maximum.at(prof, b, dev)
    return prof


def trace_deviation(
    D: DiscreteSolution, f: BoundaryDatum, refined: Optional[DiscreteSolution] = None, n_bins: int = 64, threshold: float = DEV_THRESHOLD
) -> TraceDeviation:
    """Boundary-layer deviation from the datum, with a refinement-persistence flag.

    A boundary bin flags non-existence when its deviation exceeds
    ``threshold * range(f)`` on both grids and does not shrink by more than
    one level step under refinement.  Without ``refined`` the instance is
    re-solved at half the spacing.
    """
    if refined is None:
        G = D.graph
        refined = solve_oracle(f, G.spec.h / 2, G.connectivity, len(D.levels))
    pc = deviation_profile(D, f, n_bins)
    pf = deviation_profile(refined, f, n_bins)
    thr = threshold * f.range
    step = max(D.level_step, refined.level_step)
    hit = (pc > thr) & (pf > thr) & (pf >= pc - step)
    return TraceDeviation(float(pc.max()), float(pf.max()), pc, pf, thr, bool(hit.any()), np.flatnonzero(hit))


# -- comparison ------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    linf: float
    l1: float
    tv_oracle: float
    tv_solver: float
    tv_gap: float  # relative
    range: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def compare(D: DiscreteSolution, S) -> Comparison:
    """Masked-cell error metrics between an oracle field and a level solution."""
    from .chord_solver import tv_coarea

    G = D.graph
    mask = G.spec.mask(S.polygon)
    if not np.array_equal(mask, G.mask):
        raise OracleError("grid mismatch: masks differ")
    us = S.evaluate(G.centers[G.inside])
    diff = np.abs(us - D.u_nodes[G.inside])
    tv_s = tv_coarea(S)
    gap = abs(D.tv - tv_s) / tv_s if tv_s > 0 else abs(D.tv)
    return Comparison(float(diff.max()), float(diff.sum() * G.spec.h**2), D.tv, tv_s, gap, S.datum.range)
