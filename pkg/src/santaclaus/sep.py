"""Separation for the dual of the DW configuration LP.

Greedy pricing follows the continuous-greedy route: maximise the multilinear
extension of the truncated sink valuation over the LINSEP polytope, then
round by sampling one path per last edge and packing by cost.  Exact pricing
enumerates minimal covering edge sets of the sink and solves a min-cost flow
for each; it is only meant for small sinks.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import linprog

from .auggraph import AugInstance
from .clp import Column, configuration_violation, unit_witness
from .config import SolverConfig
from .flowcore import decompose
from .instance import TOL, CapabilityError, TruncatedOracle, ValuationOracle, all_subset_values

INF = float("inf")


# ---------------------------------------------------------------- multilinear

def multilinear_exact(oracle: ValuationOracle, x) -> float:
    """F(x) by summing over all subsets (n <= 16)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n > 16:
        raise CapabilityError("exact multilinear extension limited to 16 elements")
    vals = all_subset_values(oracle)
    codes = np.arange(1 << n)
    bits = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    probs = np.where(bits, x, 1 - x).prod(axis=1)
    return float(probs @ vals)


def multilinear_estimate(oracle: ValuationOracle, x, samples: int = 2000,
                         rng: np.random.Generator | None = None, exact: bool = False) -> float:
    """Monte-Carlo (or exact) value of the multilinear extension at x."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -TOL) or np.any(x > 1 + TOL):
        raise ValueError("x must lie in [0, 1]^n")
    if exact:
        return multilinear_exact(oracle, x)
    rng = rng or np.random.default_rng(0)
    masks = rng.random((samples, len(x))) < x
    return float(oracle.evaluate_batch(masks).mean())


def marginal_estimates(oracle: ValuationOracle, x, samples: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Estimate E[f(j | R)] for every j with R ~ x."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    R = rng.random((samples, n)) < x
    base = oracle.evaluate_batch(R)
    plus = np.repeat(R[None, :, :], n, axis=0)
    plus[np.arange(n), :, np.arange(n)] = True
    vals = oracle.evaluate_batch(plus.reshape(n * samples, n)).reshape(n, samples)
    return (vals - base[None, :]).mean(axis=1)


@dataclass
class GreedyResult:
    y: np.ndarray
    directions: list
    step: float


def continuous_greedy(oracle: ValuationOracle, linear_max: Callable[[np.ndarray], object],
                      delta: float = 0.02, samples: int = 2000,
                      rng: np.random.Generator | None = None) -> GreedyResult | None:
    """Continuous greedy with an approximate linear maximiser over Q.

    ``linear_max(c)`` returns a point of Q (numpy vector) or None when P is
    empty.  The output is the average of the returned directions, hence in Q.
    """
    rng = rng or np.random.default_rng(0)
    n = len(oracle.ground)
    steps = max(1, math.ceil(1 / delta))
    step = 1.0 / steps
    y = np.zeros(n)
    dirs = []
    for _ in range(steps):
        w = marginal_estimates(oracle, np.clip(y, 0, 1), samples, rng)
        d = linear_max(w)
        if d is None:
            return None
        d = np.asarray(d, dtype=float)
        dirs.append(d)
        y = y + step * d
    return GreedyResult(y, dirs, step)


def budget_box_maximizer(k: float) -> Callable[[np.ndarray], np.ndarray]:
    """Linear maximiser over {x in [0,1]^n : sum x <= k}: fill the best positive coordinates."""
    def lin(c):
        c = np.asarray(c, dtype=float)
        x = np.zeros(len(c))
        left = float(k)
        for j in np.argsort(-c, kind="stable"):
            if c[j] <= 0 or left <= 0:
                break
            x[j] = min(1.0, left)
            left -= x[j]
        return x
    return lin


# ---------------------------------------------------------------- context

@dataclass
class SepContext:
    """One separation subproblem: sink u at a level under duals (pi_u, mu)."""
    aug: AugInstance
    level: int
    sink: str
    pi: float
    mu: Mapping
    alpha: float
    beta: float
    kappa: dict  # source -> cost of its linked obligation (inf if unusable)
    subcols: dict  # source -> Column at level+1 or None
    removed: set = field(default_factory=set)

    def __post_init__(self):
        lv = self.aug.levels[self.level]
        self.lv = lv
        self.delta_edges = list(lv.delta(self.sink))
        self.src_of_edge = {lv.source_edge(s): s for s in lv.sources
                            if lv.source_edge(s) is not None}

    def edge_cost(self, e) -> float:
        c = self.mu.get((self.level, e), 0.0)
        s = self.src_of_edge.get(e)
        if s is not None:
            c += self.kappa.get(s, 0.0)
        return c

    def truncated(self) -> ValuationOracle:
        return TruncatedOracle(self.lv.valuations[self.sink], 1.0)

    def make_column(self, g: Mapping) -> Column:
        lv = self.lv
        used = [s for s in lv.sources
                if (e := lv.source_edge(s)) is not None and g.get(e, 0) > 0]
        sub = None
        if self.level + 1 < self.aug.h:
            cols = [self.subcols[s] for s in used if self.subcols.get(s) is not None]
            sub = unit_witness(self.level + 1, cols)
        return Column(self.sink, self.level, {e: int(x) for e, x in g.items() if x}, sub)

    def column_ok(self, col: Column) -> bool:
        if configuration_violation(self.aug, self.level, self.sink, col.g,
                                   self.alpha, self.beta) is not None:
            return False
        return all(x <= self.beta + TOL for x in col.d().values())


def _rng(seed, level, sink, counter) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), int(level), zlib.crc32(str(sink).encode()),
                                 int(counter)])
    return np.random.default_rng(ss)


# ---------------------------------------------------------------- LINSEP

class Linsep:
    """LP over flows into the sink with the dual-cost budget and sub-budget coupling.

    Sub-budgets use a fixed cheapest point per source scaled by its usage
    y_s, which keeps the program linear.
    """

    def __init__(self, ctx: SepContext):
        self.ctx = ctx
        lv = ctx.lv
        m = len(lv.edges)
        self.m = m
        ub = np.ones(m)
        for e, (u, v) in enumerate(lv.edges):
            if v in lv.sink_set and v != ctx.sink:
                ub[e] = 0
            if e in ctx.removed:
                ub[e] = 0
            s = ctx.src_of_edge.get(e)
            if s is not None and not math.isfinite(ctx.kappa.get(s, 0.0)):
                ub[e] = 0
        self.bounds = [(0.0, float(x)) for x in ub]
        interior = sorted({w for ed in lv.edges for w in ed} - lv.source_set - lv.sink_set)
        vidx = {w: j for j, w in enumerate(interior)}
        A_eq = np.zeros((len(interior), m))
        for e, (u, v) in enumerate(lv.edges):
            if u in vidx:
                A_eq[vidx[u], e] -= 1
            if v in vidx:
                A_eq[vidx[v], e] += 1
        self.A_eq, self.b_eq = A_eq, np.zeros(len(interior))
        rows, rhs = [], []
        if math.isfinite(ctx.pi):
            rows.append([ctx.edge_cost(e) if ub[e] > 0 else 0.0 for e in range(m)])
            rhs.append(ctx.pi)
        deeper: dict = {}
        for s, col in ctx.subcols.items():
            if col is None:
                continue
            e = lv.source_edge(s)
            for k, x in col.usage().items():
                deeper.setdefault(k, {})[e] = x
        for k, coef in sorted(deeper.items()):
            row = np.zeros(m)
            for e, x in coef.items():
                row[e] = x
            rows.append(row)
            rhs.append(1.0)
        self.A_ub = np.array(rows) if rows else None
        self.b_ub = np.array(rhs) if rows else None
        self.didx = {e: j for j, e in enumerate(ctx.delta_edges)}

    def solve(self, c_delta) -> np.ndarray | None:
        """Maximise c over the sink's in-edges; returns the full edge vector."""
        c = np.zeros(self.m)
        for e, j in self.didx.items():
            c[e] = -float(c_delta[j])
        res = linprog(c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
                      bounds=self.bounds, method="highs")
        if res.status != 0:
            return None
        return np.clip(res.x, 0.0, 1.0)


def solve_linsep(ctx: SepContext, c) -> np.ndarray | None:
    return Linsep(ctx).solve(c)


# ---------------------------------------------------------------- rounding

@dataclass
class RoundingStats:
    attempts: int = 0
    partitions: list = field(default_factory=list)


def phi_partition(paths: list, phi: list, pi: float):
    """Greedy packing into P'_0 and sets P'_1.. with cost < pi each."""
    p0, sets, cur, cur_phi = [], [], [], 0.0
    for P, c in zip(paths, phi):
        if cur_phi + c < pi:
            cur.append(P)
            cur_phi += c
        else:
            p0.append(P)
            sets.append(cur)
            cur, cur_phi = [], 0.0
    if cur or not sets:
        sets.append(cur)
    return p0, sets


def round_separation(ctx: SepContext, g_frac: np.ndarray, rng: np.random.Generator,
                     attempts: int, stats: RoundingStats | None = None) -> Column | None:
    """Las Vegas rounding of a fractional LINSEP point into a violating column."""
    lv = ctx.lv
    flow = {e: float(x) for e, x in enumerate(g_frac) if x > 1e-9}
    if not flow:
        return None
    sources = [s for s in lv.sources if lv.source_edge(s) is not None]
    paths = decompose(flow, lv.edge_map, sources, [ctx.sink], tol=1e-9)
    groups: dict = {}
    for p in paths:
        groups.setdefault(p.last, []).append(p)
    dset = set(ctx.delta_edges)
    f = ctx.lv.valuations[ctx.sink]

    def phi(p):
        return sum(ctx.mu.get((ctx.level, e), 0.0) for e in p.edges) + \
            ctx.kappa.get(ctx.src_of_edge[p.first], 0.0)

    for att in range(attempts):
        if stats is not None:
            stats.attempts += 1
        chosen = []
        for last in sorted(groups):
            u = rng.random()
            acc = 0.0
            for p in groups[last]:
                acc += p.weight
                if u < acc:
                    chosen.append(p)
                    break
        if not chosen:
            continue
        costs = [phi(p) for p in chosen]
        total = sum(costs)
        k = max(1, math.ceil(total / ctx.pi)) if math.isfinite(ctx.pi) and ctx.pi > 0 else 1
        p0, sets = phi_partition(chosen, costs, ctx.pi)
        assert len(p0) <= k and len(sets) <= k + 1, (len(p0), len(sets), k)
        if stats is not None:
            stats.partitions.append((k, len(p0), len(sets)))
        best = None
        for group in sets:
            if not group:
                continue
            g: dict = {}
            for p in group:
                for e in p.edges:
                    g[e] = g.get(e, 0) + 1
            used = [e for e in g if e in dset]
            if f.evaluate(used) < 1.0 / ctx.alpha - TOL:
                continue
            col = ctx.make_column(g)
            cost = col.cost(ctx.mu)
            if cost >= ctx.pi or not ctx.column_ok(col):
                continue
            if best is None or cost < best[0]:
                best = (cost, col)
        if best is not None:
            col = best[1]
            assert ctx.column_ok(col) and col.cost(ctx.mu) < ctx.pi
            return col
    return None


# ---------------------------------------------------------------- large singletons

def shortest_source_path(ctx: SepContext, target_vertex) -> tuple[float, list] | None:
    """Cheapest source-to-vertex path under mu with source offsets kappa."""
    import heapq
    lv = ctx.lv
    dist, prev = {}, {}
    heap = []
    for s in lv.sources:
        e = lv.source_edge(s)
        k = ctx.kappa.get(s, 0.0)
        if e is None or not math.isfinite(k):
            continue
        dist[s] = k
        heapq.heappush(heap, (k, repr(s), s))
    done = set()
    while heap:
        d, _, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v == target_vertex:
            break
        if v in lv.sink_set:
            continue
        for e in lv.out_edges.get(v, []):
            w = lv.edges[e][1]
            if w in lv.sink_set:
                continue
            nd = d + ctx.mu.get((ctx.level, e), 0.0)
            if nd < dist.get(w, INF) - 1e-15:
                dist[w] = nd
                prev[w] = e
                heapq.heappush(heap, (nd, repr(w), w))
    if target_vertex not in done:
        return None
    path, v = [], target_vertex
    while v in prev:
        e = prev[v]
        path.append(e)
        v = lv.edges[e][0]
    return dist[target_vertex], path[::-1]


def handle_large_singletons(ctx: SepContext) -> tuple[Column | None, set]:
    """Route each edge of singleton value >= 1/alpha directly; drop them otherwise.

    Returns (direct column violating the dual constraint or None, removed edges).
    """
    f = ctx.lv.valuations[ctx.sink]
    single = dict(zip(f.ground, np.minimum(1.0, f.singletons())))
    large = [e for e in ctx.delta_edges if single[e] >= 1.0 / ctx.alpha - TOL]
    best = None
    for e in large:
        tail = ctx.lv.edges[e][0]
        if tail in ctx.lv.source_set:
            k = ctx.kappa.get(tail, 0.0)
            sp = (k, []) if math.isfinite(k) else None
        else:
            sp = shortest_source_path(ctx, tail)
        if sp is None:
            continue
        g = {x: 1 for x in sp[1] + [e]}
        col = ctx.make_column(g)
        cost = col.cost(ctx.mu)
        if cost < ctx.pi and ctx.column_ok(col) and (best is None or cost < best[0]):
            best = (cost, col)
    return (best[1] if best else None), set(large)


# ---------------------------------------------------------------- exact pricing

def minimal_covers(f: ValuationOracle, threshold: float, limit: int) -> list | None:
    """Minimal subsets (as index tuples) with f >= threshold; None past ``limit``."""
    n = len(f.ground)
    vals = all_subset_values(f)
    codes = sorted(range(1 << n), key=lambda c: (bin(c).count("1"), c))
    covers = []
    for c in codes:
        if vals[c] < threshold - TOL:
            continue
        if any((c & m) == m for m in covers):
            continue
        covers.append(c)
        if len(covers) > limit:
            return None
    return [tuple(j for j in range(n) if c >> j & 1) for c in covers]


def exact_best_column(ctx: SepContext, limit: int) -> Column | None:
    """Cheapest column for the sink with congestion one, by enumeration."""
    lv = ctx.lv
    if not ctx.delta_edges:
        return None  # nothing can cover a sink without in-edges
    f = lv.valuations[ctx.sink]
    covers = minimal_covers(f, 1.0 / ctx.alpha, limit)
    if covers is None:
        raise CapabilityError("too many minimal covering sets for exact pricing")
    lp = Linsep(SepContext(ctx.aug, ctx.level, ctx.sink, INF, ctx.mu, ctx.alpha, ctx.beta,
                           ctx.kappa, ctx.subcols))
    cost = np.array([ctx.edge_cost(e) if lp.bounds[e][1] > 0 else 0.0 for e in range(lp.m)])
    # edge-disjoint paths cost at least the sum of their shortest paths
    lb = {}
    for e in ctx.delta_edges:
        tail = lv.edges[e][0]
        if tail in lv.source_set:
            lb[e] = ctx.kappa.get(tail, 0.0) + ctx.mu.get((ctx.level, e), 0.0)
        else:
            sp = shortest_source_path(ctx, tail)
            lb[e] = INF if sp is None else sp[0] + ctx.mu.get((ctx.level, e), 0.0)
    ranked = sorted((sum(lb[f.ground[j]] for j in c), c) for c in covers)
    best = None
    for bound, cover in ranked:
        if not math.isfinite(bound) or bound >= ctx.pi - 1e-12:
            break
        if best is not None and bound >= best[0] - 1e-12:
            break
        edges = [f.ground[j] for j in cover]
        bounds = list(lp.bounds)
        for e in ctx.delta_edges:
            bounds[e] = (0.0, 0.0)
        feasible = True
        for e in edges:
            if lp.bounds[e][1] < 1:
                feasible = False
            bounds[e] = (1.0, 1.0)
        if not feasible:
            continue
        res = linprog(cost, A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq, b_eq=lp.b_eq,
                      bounds=bounds, method="highs-ds")
        if res.status != 0:
            continue
        if best is not None and res.fun >= best[0] - 1e-12:
            continue
        g = {e: int(round(x)) for e, x in enumerate(res.x) if x > 0.5}
        col = ctx.make_column(g)
        if not ctx.column_ok(col):
            continue
        best = (col.cost(ctx.mu), col)
    if best is None or best[0] >= ctx.pi - 1e-12:
        return None
    return best[1]


# ---------------------------------------------------------------- pricer

class Pricer:
    """Approximate separation oracle shared by membership calls."""

    def __init__(self, aug: AugInstance, cfg: SolverConfig, seed: int | None = None):
        self.aug, self.cfg = aug, cfg
        self.seed = cfg.seed if seed is None else seed
        self.calls = 0
        self.attempts = cfg.attempts_for(aug.n)
        self.rounding_stats = RoundingStats()

    # strategy for one sink
    def _mode(self, level, sink) -> str:
        if self.cfg.pricing != "auto":
            return self.cfg.pricing
        d = len(self.aug.levels[level].delta(sink))
        return "exact" if d <= self.cfg.exact_max_delta else "greedy"

    def _context(self, level, sink, pi, mu, memo) -> SepContext:
        lv = self.aug.levels[level]
        kappa, subcols = {}, {}
        for s in lv.sources:
            if lv.source_edge(s) is None:
                continue
            linked = self.aug.linked_sinks(level, [s])
            if not linked:
                kappa[s], subcols[s] = 0.0, None
                continue
            (t,) = linked
            col = self.cheapest(level + 1, t, mu, memo)
            subcols[s] = col
            kappa[s] = col.cost(mu) if col is not None else INF
        return SepContext(self.aug, level, sink, pi, mu, self.cfg.alpha, self.cfg.beta,
                          kappa, subcols)

    def _search(self, ctx: SepContext) -> Column | None:
        mode = self._mode(ctx.level, ctx.sink)
        if mode == "exact":
            try:
                return exact_best_column(ctx, self.cfg.exact_max_subsets)
            except CapabilityError:
                if self.cfg.pricing == "exact":
                    raise
        return self._greedy(ctx)

    def _greedy(self, ctx: SepContext) -> Column | None:
        if not ctx.delta_edges:
            return None
        direct, removed = handle_large_singletons(ctx)
        if direct is not None:
            return direct
        ctx.removed = removed
        keep = [e for e in ctx.delta_edges if e not in removed]
        if not keep:
            return None
        self.calls += 1
        rng = _rng(self.seed, ctx.level, ctx.sink, self.calls)
        lin = Linsep(ctx)
        f = ctx.truncated()
        full = []

        def linear_max(c):
            c = np.where([e in removed for e in ctx.delta_edges], 0.0, c)
            x = lin.solve(c)
            if x is None:
                return None
            full.append(x)
            return np.array([x[e] for e in ctx.delta_edges])

        res = continuous_greedy(f, linear_max, self.cfg.cg_delta, self.cfg.cg_samples, rng)
        if res is None:
            return None
        g_frac = np.mean(full, axis=0)
        return round_separation(ctx, g_frac, rng, self.attempts, self.rounding_stats)

    def cheapest(self, level, sink, mu, memo=None) -> Column | None:
        """Approximately cheapest column for one sink under mu."""
        memo = {} if memo is None else memo
        key = (level, sink)
        if key in memo:
            return memo[key]
        ctx = self._context(level, sink, INF, mu, memo)
        best = self._search(ctx)
        if best is not None and self._mode(level, sink) != "exact":
            for _ in range(self.cfg.cheapest_rounds):
                c = best.cost(mu)
                if c <= 1e-12:
                    break
                ctx = self._context(level, sink, c * (1 - 1e-3), mu, memo)
                nxt = self._search(ctx)
                if nxt is None:
                    break
                best = nxt
        memo[key] = best
        return best

    def price(self, level, sinks, pi: Mapping, mu: Mapping) -> list:
        """Columns violating their dual constraint, at most one per sink."""
        memo: dict = {}
        out = []
        for u in sorted(sinks):
            p = pi.get(u, 0.0)
            if p <= 1e-12:
                continue
            ctx = self._context(level, u, p, mu, memo)
            col = self._search(ctx)
            if col is not None:
                assert col.cost(mu) < p
                out.append(col)
        return out
