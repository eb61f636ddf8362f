"""Multi-level configuration LP in Dantzig-Wolfe form.

A column is a configuration ``g`` for one sink at one level together with a
witness for the sinks it obliges on the next level; its budget vector ``d``
is that witness' usage.  Budgets and usages are dicts keyed by
``(level, edge id)``.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import linprog

from .auggraph import AugInstance, Level
from .config import SolverConfig
from .ellipsoid import solve_feasibility
from .instance import TOL, InputError

LP_TOL = 1e-7

_uid = itertools.count()


class ContractError(RuntimeError):
    pass


@dataclass(eq=False)
class Column:
    sink: str
    level: int
    g: dict  # edge id -> int, flow on the column's level
    sub: "Witness | None" = None
    uid: int = field(default_factory=lambda: next(_uid))

    def usage(self) -> dict:
        out = {(self.level, e): float(x) for e, x in self.g.items() if x}
        if self.sub is not None:
            for k, x in self.sub.usage().items():
                out[k] = out.get(k, 0.0) + x
        return out

    def d(self) -> dict:
        return self.sub.usage() if self.sub is not None else {}

    def key(self) -> tuple:
        """Structural identity used to deduplicate columns."""
        sub = self.sub.key() if self.sub is not None else ()
        return (self.sink, self.level, tuple(sorted(self.g.items())), sub)

    def cost(self, mu: Mapping) -> float:
        return sum(x * mu.get(k, 0.0) for k, x in self.usage().items())


@dataclass(eq=False)
class Witness:
    level: int
    sinks: tuple
    columns: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def usage(self) -> dict:
        out: dict = defaultdict(float)
        for c, y in zip(self.columns, self.weights):
            for k, x in c.usage().items():
                out[k] += y * x
        return dict(out)

    def key(self) -> tuple:
        return (self.level, tuple(sorted(self.sinks)),
                tuple(sorted((c.key(), round(y, 12)) for c, y in zip(self.columns, self.weights))))

    def columns_of(self, sink) -> list:
        return [(c, y) for c, y in zip(self.columns, self.weights) if c.sink == sink]

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "sinks": list(self.sinks),
            "columns": [{
                "sink": c.sink,
                "weight": y,
                "g": {str(e): x for e, x in sorted(c.g.items())},
                "sub": c.sub.to_json() if c.sub is not None else None,
            } for c, y in zip(self.columns, self.weights)],
        }


def empty_witness(level: int) -> Witness:
    return Witness(level, ())


def unit_witness(level: int, columns: list) -> Witness:
    """Witness giving weight 1 to one column per sink."""
    return Witness(level, tuple(c.sink for c in columns), list(columns), [1.0] * len(columns))


def merge_witness(*ws: Witness) -> Witness:
    """Sum of witnesses for disjoint sink sets is a witness for the union."""
    ws = [w for w in ws if w is not None]
    if not ws:
        raise InputError("nothing to merge")
    level = ws[0].level
    sinks: list = []
    cols, wts = [], []
    for w in ws:
        if w.level != level:
            raise InputError("cannot merge witnesses of different levels")
        if set(sinks) & set(w.sinks):
            raise InputError("merged witnesses must have disjoint sinks")
        sinks.extend(w.sinks)
        cols.extend(w.columns)
        wts.extend(w.weights)
    return Witness(level, tuple(sinks), cols, wts)


def split_budget(b: Mapping, t1, t2, witness: Witness):
    """Split b between two disjoint sink sets by masking the witness columns.

    Returns (b1, b2, w1, w2): b2 is the usage of the columns serving t2 and
    b1 = b - b2 keeps the rest including any slack.
    """
    t1, t2 = set(t1), set(t2)
    if t1 & t2:
        raise InputError("sink sets must be disjoint")
    if (t1 | t2) != set(witness.sinks):
        raise InputError("witness must cover exactly the union of the sink sets")
    c1 = [(c, y) for c, y in zip(witness.columns, witness.weights) if c.sink in t1]
    c2 = [(c, y) for c, y in zip(witness.columns, witness.weights) if c.sink in t2]
    w1 = Witness(witness.level, tuple(s for s in witness.sinks if s in t1),
                 [c for c, _ in c1], [y for _, y in c1])
    w2 = Witness(witness.level, tuple(s for s in witness.sinks if s in t2),
                 [c for c, _ in c2], [y for _, y in c2])
    b2 = {k: 0.0 for k in b}
    b2.update(w2.usage())
    b1 = {k: b[k] - b2.get(k, 0.0) for k in b}
    return b1, b2, w1, w2


def all_budget_keys(aug: AugInstance, level: int) -> list:
    return [(i, e) for i in range(level, aug.h) for e in range(len(aug.levels[i].edges))]


def uniform_budget(aug: AugInstance, level: int, value: float) -> dict:
    return {k: float(value) for k in all_budget_keys(aug, level)}


def column_sources(lv: Level, g: Mapping) -> list:
    return [s for s in lv.sources
            if (e := lv.source_edge(s)) is not None and g.get(e, 0) > 0]


def configuration_violation(aug: AugInstance, level: int, sink, g: Mapping,
                            alpha: float, beta: float) -> str | None:
    """Why ``g`` is not in C(sink, alpha, beta), or None."""
    lv = aug.levels[level]
    net: dict = defaultdict(int)
    for e, x in g.items():
        if x != int(x) or x < 0:
            return f"non-integral flow on edge {e}"
        if x > beta + TOL:
            return f"congestion {x} > {beta} on edge {e}"
        u, v = lv.edges[e]
        net[u] -= x
        net[v] += x
        if v in lv.sink_set and v != sink and x > 0:
            return f"flow reaches foreign sink {v}"
    for v, x in net.items():
        if v not in lv.source_set and v not in lv.sink_set and x:
            return f"conservation violated at {v}"
    used = [e for e in lv.delta(sink) if g.get(e, 0) > 0]
    if lv.sink_value(sink, used) < 1.0 / alpha - TOL:
        return f"coverage of {sink} below 1/{alpha}"
    return None


def audit_witness(aug: AugInstance, witness: Witness, b: Mapping | None, alpha: float,
                  beta: float, tol: float = LP_TOL) -> list:
    """All violated constraints of the DW system, as readable strings."""
    errs: list = []
    i = witness.level
    sinks = set(witness.sinks)
    for v in witness.sinks:
        tot = sum(y for c, y in witness.columns_of(v))
        if tot < 1 - tol:
            errs.append(f"level {i}: sink {v} has total weight {tot:.6g} < 1")
    for c, y in zip(witness.columns, witness.weights):
        if y < -tol:
            errs.append(f"level {i}: negative weight")
        if c.sink not in sinks or c.level != i:
            errs.append(f"level {i}: column for foreign sink {c.sink}")
            continue
        why = configuration_violation(aug, i, c.sink, c.g, alpha, beta)
        if why:
            errs.append(f"level {i}: {why}")
        need = aug.linked_sinks(i, column_sources(aug.levels[i], c.g))
        if i + 1 < aug.h:
            sub = c.sub or empty_witness(i + 1)
            if set(sub.sinks) != need:
                errs.append(f"level {i}: sub-witness sinks {sorted(sub.sinks)} != {sorted(need)}")
            d = sub.usage()
            if any(x > beta + tol for x in d.values()):
                errs.append(f"level {i}: sub-budget exceeds beta")
            errs.extend(audit_witness(aug, sub, None, alpha, beta, tol))
    if b is not None:
        for k, x in witness.usage().items():
            if k[0] < i:
                errs.append(f"usage at level {k[0]} above witness level {i}")
            elif x > b.get(k, 0.0) + tol:
                errs.append(f"budget exceeded on {k}: {x:.6g} > {b.get(k, 0.0):.6g}")
    return errs


def dual_violation_value(pi: Mapping, mu: Mapping, column: Column) -> float:
    """Left side minus right side of the column's dual constraint."""
    return column.cost(mu) - pi.get(column.sink, 0.0)


def to_clp_solution(witness: Witness) -> dict:
    """Aggregate DW weights into x_{v,g} and b_{v,g} keyed by (sink, g)."""
    x: dict = defaultdict(float)
    bvg: dict = defaultdict(lambda: defaultdict(float))
    for c, y in zip(witness.columns, witness.weights):
        key = (c.sink, tuple(sorted(c.g.items())))
        x[key] += y
        for k, val in c.usage().items():
            bvg[key][k] += y * val
    return {"x": dict(x), "b": {k: dict(v) for k, v in bvg.items()}}


@dataclass
class MasterResult:
    objective: float
    y: np.ndarray
    pi: dict
    mu: dict


def solve_master(columns: list, sinks, b: Mapping) -> MasterResult:
    """Phase-one restricted master: minimise total coverage slack."""
    sinks = list(sinks)
    m, ns = len(columns), len(sinks)
    usages = [c.usage() for c in columns]
    keys = sorted({k for u in usages for k in u})
    kidx = {k: j for j, k in enumerate(keys)}
    sidx = {v: j for j, v in enumerate(sinks)}
    A = np.zeros((ns + len(keys), m + ns))
    rhs = np.zeros(ns + len(keys))
    for j, c in enumerate(columns):
        A[sidx[c.sink], j] = -1.0
        for k, x in usages[j].items():
            A[ns + kidx[k], j] = x
    for v, j in sidx.items():
        A[j, m + j] = -1.0
        rhs[j] = -1.0
    for k, j in kidx.items():
        rhs[ns + j] = b.get(k, 0.0)
    cost = np.concatenate([np.zeros(m), np.ones(ns)])
    res = linprog(cost, A_ub=A, b_ub=rhs, bounds=(0, None), method="highs")
    if res.status != 0:
        raise ContractError(f"restricted master failed: {res.message}")
    marg = -res.ineqlin.marginals
    pi = {v: max(0.0, float(marg[j])) for v, j in sidx.items()}
    mu = {k: max(0.0, float(marg[ns + j])) for k, j in kidx.items()}
    return MasterResult(float(res.fun), res.x[:m], pi, mu)


def dw_reconstruct_primal(columns: list, sinks, b: Mapping, level: int) -> Witness:
    """Solve the primal restricted to the encountered columns."""
    sinks = tuple(sinks)
    if not sinks:
        return empty_witness(level)
    mr = solve_master(columns, sinks, b)
    if mr.objective > LP_TOL:
        raise ContractError("restricted primal infeasible on encountered columns")
    return _witness_from(columns, mr.y, sinks, level)


def _witness_from(columns, y, sinks, level) -> Witness:
    keep = [(c, float(v)) for c, v in zip(columns, y) if v > 1e-12]
    w = Witness(level, tuple(sinks), [c for c, _ in keep], [v for _, v in keep])
    # absorb LP round-off so every sink sums to at least one
    for v in sinks:
        tot = sum(y for c, y in w.columns_of(v))
        if 1 - LP_TOL <= tot < 1:
            w.weights = [y / tot if c.sink == v else y for c, y in zip(w.columns, w.weights)]
    return w


@dataclass
class MembershipResult:
    status: str  # "member" | "hyperplane" | "budget"
    witness: Witness | None = None
    w: dict | None = None  # hyperplane normal, keyed like budgets
    W: float | None = None
    columns: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def member(self) -> bool:
        return self.status == "member"


def _normalize_plane(mu: Mapping, W: float):
    norm = float(np.sqrt(sum(x * x for x in mu.values()) + W * W))
    if norm == 0:
        return dict(mu), W
    return {k: x / norm for k, x in mu.items()}, W / norm


class _Pool:
    def __init__(self):
        self.cols, self.keys = [], set()

    def add(self, cols) -> int:
        added = 0
        for c in cols:
            k = c.key()
            if k not in self.keys:
                self.keys.add(k)
                self.cols.append(c)
                added += 1
        return added


def membership(aug: AugInstance, level: int, sinks, b: Mapping, cfg: SolverConfig,
               pricer=None) -> MembershipResult:
    """Decide b in B(T*, alpha, beta) or separate it from B(T*, 1, 1).

    A capped ellipsoid run on the normalised dual collects columns; column
    generation on the phase-one restricted master then finishes the job.
    """
    sinks = tuple(sorted(sinks))
    if not sinks:
        return MembershipResult("member", empty_witness(level))
    if pricer is None:
        from .sep import Pricer
        pricer = Pricer(aug, cfg)
    for k, x in b.items():
        if x < -TOL or x > cfg.beta + TOL:
            raise InputError(f"budget {x} on {k} outside [0, beta]")
    pool = _Pool()
    stats = {"ellipsoid_iterations": 0, "cg_iterations": 0, "pricing_calls": 0}

    if cfg.ellipsoid_cap > 0:
        plane = _ellipsoid_phase(aug, level, sinks, b, cfg, pricer, pool, stats)
        if plane is not None:
            w, W = _normalize_plane(*plane)
            return MembershipResult("hyperplane", w=w, W=W, columns=pool.cols, stats=stats)

    for it in range(cfg.cg_max_iter):
        stats["cg_iterations"] = it + 1
        mr = solve_master(pool.cols, sinks, b)
        if mr.objective <= LP_TOL:
            wit = _witness_from(pool.cols, mr.y, sinks, level)
            return MembershipResult("member", wit, columns=pool.cols, stats=stats)
        stats["pricing_calls"] += 1
        new = pricer.price(level, sinks, mr.pi, mr.mu)
        if not pool.add(new):
            W = sum(mr.pi.values())
            w, W = _normalize_plane(mr.mu, W)
            return MembershipResult("hyperplane", w=w, W=W, columns=pool.cols, stats=stats)
    return MembershipResult("budget", columns=pool.cols, stats=stats)


def _ellipsoid_phase(aug, level, sinks, b, cfg, pricer, pool, stats):
    """Run the ellipsoid on P' with pi[v0] eliminated; returns (mu, W) if Q' is hit."""
    keys = all_budget_keys(aug, level)
    others = list(sinks[1:])
    v0 = sinks[0]
    dim = len(others) + len(keys)
    np_ = len(others)
    bvec = np.array([b.get(k, 0.0) for k in keys])
    kidx = {k: j for j, k in enumerate(keys)}
    M = 4.0 * (len(sinks) + 1)
    R = M * np.sqrt(dim) / 2 + 1e-9
    found = {}

    def split(x):
        pis = dict(zip(others, x[:np_]))
        mu_arr = x[np_:]
        pis[v0] = 1.0 + float(bvec @ mu_arr) - float(np.sum(x[:np_]))
        return pis, mu_arr

    def oracle(x):
        for j in range(dim):
            if x[j] < 0:
                a = np.zeros(dim)
                a[j] = -1.0
                return a, 0.0
            if x[j] > M:
                a = np.zeros(dim)
                a[j] = 1.0
                return a, M
        pis, mu_arr = split(x)
        if pis[v0] < 0:
            a = np.concatenate([np.ones(np_), -bvec])
            return a, 1.0
        mu = {k: float(mu_arr[j]) for k, j in kidx.items()}
        stats["pricing_calls"] += 1
        cols = pricer.price(level, sinks, pis, mu)
        pool.add(cols)
        if not cols:
            found["plane"] = (mu, float(sum(pis.values())))
            return None
        c = min(cols, key=lambda c: dual_violation_value(pis, mu, c))
        ac = np.zeros(len(keys))
        for k, val in c.usage().items():
            ac[kidx[k]] += val
        if c.sink == v0:
            a = np.concatenate([-np.ones(np_), bvec - ac])
            return a, -1.0
        a = np.concatenate([np.zeros(np_), -ac])
        a[others.index(c.sink)] = 1.0
        return a, 0.0

    res = solve_feasibility(dim, R, min(cfg.inner_radius, R), oracle,
                            center=np.full(dim, M / 2), max_iter=cfg.ellipsoid_cap)
    stats["ellipsoid_iterations"] = res.iterations
    return found.get("plane")
