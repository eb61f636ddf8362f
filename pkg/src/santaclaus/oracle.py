"""Brute-force ground truth for small instances.

Nothing here calls into the solver modules: allocations are enumerated
directly, flows are enumerated by their own search, and the explicit
configuration LP is decided by a small exact simplex over Fractions.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

import numpy as np

from .instance import TOL, CapabilityError, InputError, Instance, all_subset_values

MAX_ALLOCATIONS = 10 ** 7
MAX_CONFIG_EDGES = 40
MAX_AUG_EDGES = 40
MAX_LP_COLUMNS = 10 ** 5
MAX_SEARCH_NODES = 2_000_000


# ---------------------------------------------------------------- allocations

def brute_opt(instance: Instance) -> tuple[float, dict]:
    """Exact max-min value by enumerating every allocation of every resource."""
    P, R = instance.players, instance.resources
    if not P:
        raise InputError("instance has no players")
    if len(P) ** len(R) > MAX_ALLOCATIONS or len(R) > 20:
        raise CapabilityError(f"{len(P)}^{len(R)} allocations is past the brute-force limit")
    if not R:
        return instance.min_value({}), {}
    # per-player value tables indexed by the bitmask of the bundle in R order
    tables = []
    for p in P:
        f = instance.valuations[p]
        perm = [f.index[r] for r in R]
        vals = all_subset_values(f)
        codes = np.arange(1 << len(R))
        own = np.zeros_like(codes)
        for j, k in enumerate(perm):
            own |= ((codes >> j) & 1) << k
        tables.append(vals[own])
    m, k = len(R), len(P)
    total = k ** m
    best, best_idx = -1.0, 0
    chunk = 1 << 16
    pow_k = k ** np.arange(m)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        digits = (idx[:, None] // pow_k[None, :]) % k
        worst = np.full(len(idx), np.inf)
        for pi, table in enumerate(tables):
            mask = (digits == pi).astype(np.int64) @ (1 << np.arange(m))
            worst = np.minimum(worst, table[mask])
        j = int(np.argmax(worst))
        if worst[j] > best + 1e-12:
            best, best_idx = float(worst[j]), int(idx[j])
    assignment = {r: P[(best_idx // k ** j) % k] for j, r in enumerate(R)}
    return best, assignment


def brute_opt_recursive(instance: Instance) -> float:
    """Second enumerator: depth-first over resources with evaluate() at the leaves."""
    P, R = instance.players, instance.resources
    if not P:
        raise InputError("instance has no players")
    if len(P) ** len(R) > 10 ** 5:
        raise CapabilityError("recursive enumerator is limited to 1e5 allocations")
    bundles = {p: [] for p in P}

    def rec(j):
        if j == len(R):
            return min(instance.valuations[p].evaluate(bundles[p]) for p in P)
        best = -1.0
        for p in P:
            bundles[p].append(R[j])
            best = max(best, rec(j + 1))
            bundles[p].pop()
        return best

    return rec(0)


# ---------------------------------------------------------------- integral flows

def _integral_flows(edges: list, sources, allowed_sinks, cap: int,
                    budget: list | None = None, max_edges: int | None = None) -> Iterator[dict]:
    """All integral flows with values in [0, cap] that start in sources and end in allowed_sinks.

    ``edges`` lists (id, tail, head).  Flow may only enter allowed sinks;
    conservation holds at every other non-source vertex.  ``budget`` is a
    one-element list counting remaining search nodes.  ``max_edges`` bounds
    the number of edges that can carry such flow at all.
    """
    sources, allowed = set(sources), set(allowed_sinks)
    # restrict to edges on some source -> allowed sink walk
    out_adj, in_adj = defaultdict(list), defaultdict(list)
    for e, u, v in edges:
        out_adj[u].append((e, v))
        in_adj[v].append((e, u))
    fwd, stack = set(sources), list(sources)
    while stack:
        u = stack.pop()
        for _, v in out_adj[u]:
            if v not in fwd and v not in allowed:
                fwd.add(v)
                stack.append(v)
            elif v in allowed:
                fwd.add(v)
    bwd, stack = set(allowed), list(allowed)
    while stack:
        v = stack.pop()
        for _, u in in_adj[v]:
            if u not in bwd and u not in sources:
                bwd.add(u)
                stack.append(u)
            elif u in sources:
                bwd.add(u)
    rel = [(e, u, v) for e, u, v in edges if u in fwd and v in bwd and u not in allowed]
    if max_edges is not None and len(rel) > max_edges:
        raise CapabilityError(f"{len(rel)} usable edges; limit is {max_edges}")
    interior = {x for _, u, v in rel for x in (u, v)} - sources - allowed
    inc = defaultdict(list)
    for j, (_, u, v) in enumerate(rel):
        if u in interior:
            inc[u].append(j)
        if v in interior:
            inc[v].append(j)
    # close each interior vertex at the position of its last incident edge
    closes = defaultdict(list)
    for x, js in inc.items():
        closes[max(js)].append(x)
    remaining = {x: len(js) for x, js in inc.items()}
    bal = defaultdict(int)
    vals = [0] * len(rel)
    if budget is None:
        budget = [MAX_SEARCH_NODES]

    def rec(j):
        budget[0] -= 1
        if budget[0] < 0:
            raise CapabilityError("flow enumeration exceeded its search budget")
        if j == len(rel):
            yield {rel[k][0]: vals[k] for k in range(len(rel)) if vals[k]}
            return
        _, u, v = rel[j]
        for x in range(cap + 1):
            vals[j] = x
            if u in interior:
                bal[u] -= x
                remaining[u] -= 1
            if v in interior:
                bal[v] += x
                remaining[v] -= 1
            ok = all(bal[w] == 0 for w in closes[j])
            if ok:
                for w in (u, v):
                    if w in interior and abs(bal[w]) > cap * remaining[w]:
                        ok = False
            if ok:
                yield from rec(j + 1)
            if u in interior:
                bal[u] += x
                remaining[u] += 1
            if v in interior:
                bal[v] -= x
                remaining[v] += 1
        vals[j] = 0

    yield from rec(0)


def _sink_value(lv, v, support) -> float:
    f = lv.valuations.get(v)
    d = set(lv.in_edges.get(v, []))
    if f is None or not d:
        return 0.0
    return f.evaluate([e for e in support if e in d])


def enumerate_configurations(aug, level: int, v, alpha: float, beta: int) -> list:
    """Every integral flow into v of congestion <= beta covering v to 1/alpha."""
    lv = aug.levels[level]
    edges = [(e, u, w) for e, (u, w) in enumerate(lv.edges)]
    out = []
    for g in _integral_flows(edges, lv.sources, [v], int(beta), max_edges=MAX_CONFIG_EDGES):
        if _sink_value(lv, v, g) >= 1.0 / alpha - TOL:
            out.append(g)
    out.sort(key=lambda g: sorted(g.items()))
    return out


def _used_sources(lv, g) -> list:
    out = []
    for s in lv.sources:
        es = lv.out_edges.get(s, [])
        if es and g.get(es[0], 0) > 0:
            out.append(s)
    return out


def _linked(aug, level, sources) -> list:
    if level + 1 >= aug.h:
        return []
    inv = {s: t for t, s in aug.links[level].items()}
    return sorted(inv[s] for s in sources if s in inv)


# ---------------------------------------------------------------- exhaustive augmentation

@dataclass
class BruteAugSolution:
    flows: list
    beta: int = 1


def brute_aug(aug, t_star) -> BruteAugSolution | None:
    """A coverage-1, congestion-1 solution for t_star, or None if there is none."""
    budget = [MAX_SEARCH_NODES]
    memo: dict = {}

    def solve(i, req):
        if not req:
            return [{} for _ in range(i, aug.h)]
        if i >= aug.h:
            return None
        key = (i, req)
        if key in memo:
            return memo[key]
        lv = aug.levels[i]
        edges = [(e, u, w) for e, (u, w) in enumerate(lv.edges)]
        ans = None
        for g in _integral_flows(edges, lv.sources, req, 1, budget, MAX_AUG_EDGES):
            if any(_sink_value(lv, v, g) < 1.0 - TOL for v in req):
                continue
            nxt = frozenset(_linked(aug, i, _used_sources(lv, g)))
            rest = solve(i + 1, nxt) if i + 1 < aug.h else ([] if not nxt else None)
            if rest is not None:
                ans = [g] + rest
                break
        memo[key] = ans
        return ans

    flows = solve(0, frozenset(t_star))
    if flows is None:
        return None
    return BruteAugSolution(flows, 1)


# ---------------------------------------------------------------- exact simplex

class _LP:
    """Rows of sparse Fraction coefficients with sense '<=', '>=' or '='."""

    def __init__(self):
        self.nvar = 0
        self.names: list = []
        self.rows: list = []

    def var(self, name) -> int:
        self.names.append(name)
        self.nvar += 1
        return self.nvar - 1

    def add(self, coeffs: Mapping, sense: str, rhs) -> None:
        row = {j: Fraction(c) for j, c in coeffs.items() if c}
        self.rows.append((row, sense, Fraction(rhs)))


def _phase_one(lp: _LP) -> dict | None:
    """Feasible point of {rows, x >= 0} or None; Bland's rule, exact arithmetic."""
    rows = []
    ncol = lp.nvar
    basis = []
    for row, sense, rhs in lp.rows:
        row = dict(row)
        if sense == "<=":
            row[ncol] = Fraction(1)
            slack = ncol
            ncol += 1
        elif sense == ">=":
            row[ncol] = Fraction(-1)
            slack = None
            ncol += 1
        else:
            slack = None
        if rhs < 0:
            row = {j: -c for j, c in row.items()}
            rhs = -rhs
            slack = None
        rows.append([row, rhs])
        basis.append(slack)
    art = []
    for k, b in enumerate(basis):
        if b is None:
            rows[k][0][ncol] = Fraction(1)
            basis[k] = ncol
            art.append(ncol)
            ncol += 1
    art_set = set(art)
    # objective: minimise sum of artificials, as reduced costs over non-basic columns
    obj: dict = defaultdict(Fraction)
    obj_val = Fraction(0)
    for k, b in enumerate(basis):
        if b in art_set:
            for j, c in rows[k][0].items():
                if j not in art_set:
                    obj[j] -= c
            obj_val -= rows[k][1]
    obj = {j: c for j, c in obj.items() if c}
    while True:
        enter = next((j for j in sorted(obj) if obj[j] < 0), None)
        if enter is None:
            break
        best, leave = None, None
        for k, (row, rhs) in enumerate(rows):
            a = row.get(enter, 0)
            if a > 0:
                ratio = rhs / a
                if best is None or ratio < best or (ratio == best and basis[k] < basis[leave]):
                    best, leave = ratio, k
        if leave is None:  # unbounded is impossible for phase one
            raise RuntimeError("phase one unbounded")
        prow, prhs = rows[leave]
        a = prow[enter]
        prow = {j: c / a for j, c in prow.items()}
        prhs = prhs / a
        rows[leave] = [prow, prhs]
        for k in range(len(rows)):
            if k == leave:
                continue
            row, rhs = rows[k]
            f = row.get(enter)
            if not f:
                continue
            for j, c in prow.items():
                nv = row.get(j, 0) - f * c
                if nv:
                    row[j] = nv
                else:
                    row.pop(j, None)
            rows[k][1] = rhs - f * prhs
        f = obj.get(enter)
        if f:
            for j, c in prow.items():
                nv = obj.get(j, 0) - f * c
                if nv:
                    obj[j] = nv
                else:
                    obj.pop(j, None)
            obj_val -= f * prhs
        basis[leave] = enter
    if obj_val != 0:
        return None
    x = {}
    for k, b in enumerate(basis):
        if b < lp.nvar and rows[k][1]:
            x[b] = rows[k][1]
    return x


# ---------------------------------------------------------------- explicit configuration LP

@dataclass
class ExplicitResult:
    feasible: bool
    solution: dict = field(default_factory=dict)  # variable name -> Fraction
    n_columns: int = 0


def explicit_clp_feasible(aug, level: int, t_star, b: Mapping, alpha: float,
                          beta: int) -> ExplicitResult:
    """Decide b in B_{>=level}(t_star, alpha, beta) exactly.

    The nested program is written out in homogenised form: one node per
    chain of (sink, configuration) choices, each node owning its share of the
    budget on deeper levels, capped at beta times its weight.
    """
    t_star = sorted(t_star)
    if not t_star:
        return ExplicitResult(True, {}, 0)
    configs: dict = {}

    def confs(i, v):
        if (i, v) not in configs:
            configs[(i, v)] = enumerate_configurations(aug, i, v, alpha, beta)
        return configs[(i, v)]

    lp = _LP()
    keys = [(i, e) for i in range(level, aug.h) for e in range(len(aug.levels[i].edges))]

    def budget_rows(i, sinks, scale, budget):
        """Constraints of the level-i program for ``sinks`` scaled by ``scale``.

        ``scale`` is None (constant 1) or a variable index; ``budget`` maps
        (level, edge) to a constant or a variable index.
        """
        usage: dict = defaultdict(dict)
        for v in sinks:
            cover = {}
            for g in confs(i, v):
                if lp.nvar > MAX_LP_COLUMNS:
                    raise CapabilityError("explicit LP is past its column limit")
                x = lp.var(("x", i, v, tuple(sorted(g.items()))))
                cover[x] = 1
                for e, val in g.items():
                    usage[(i, e)][x] = usage[(i, e)].get(x, 0) + val
                nxt = _linked(aug, i, _used_sources(aug.levels[i], g))
                if nxt:
                    sub = {}
                    for k in keys:
                        if k[0] > i:
                            y = lp.var(("b", x, k))
                            sub[k] = y
                            lp.add({y: 1, x: -beta}, "<=", 0)
                            usage[k][y] = usage[k].get(y, 0) + 1
                    budget_rows(i + 1, nxt, x, sub)
            if scale is None:
                lp.add(cover, ">=", 1)
            else:
                row = dict(cover)
                row[scale] = -1
                lp.add(row, ">=", 0)
        for k in budget:
            if k[0] < i:
                continue
            row = dict(usage.get(k, {}))
            cap = budget[k]
            if not row:
                continue
            if isinstance(cap, int):  # a variable index
                row[cap] = row.get(cap, 0) - 1
                lp.add(row, "<=", 0)
            else:
                lp.add(row, "<=", cap)

    top = {k: Fraction(b.get(k, 0.0)) for k in keys}
    budget_rows(level, t_star, None, top)
    x = _phase_one(lp)
    if x is None:
        return ExplicitResult(False, {}, lp.nvar)
    return ExplicitResult(True, {lp.names[j]: v for j, v in x.items()}, lp.nvar)

