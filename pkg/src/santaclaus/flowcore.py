"""Flow utilities: path decomposition, integral max-flow, bucket quantisation.

Graphs are passed as ``edges: {edge_id: (tail, head)}`` plus source and sink
sets.  Flows are ``{edge_id: amount}``; amounts may be ints, Fractions or
floats.  Exact types are handled with zero tolerance.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping

import networkx as nx

from .instance import InputError


@dataclass(frozen=True)
class WeightedPath:
    edges: tuple
    weight: object

    @property
    def first(self):
        return self.edges[0]

    @property
    def last(self):
        return self.edges[-1]


class QuantizationError(RuntimeError):
    def __init__(self, message: str, bucket: int | None = None):
        super().__init__(message)
        self.bucket = bucket


def _is_exact(values: Iterable) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


def conservation_residual(flow: Mapping, edges: Mapping, terminals: set) -> dict:
    """Net inflow minus outflow at every non-terminal vertex with traffic."""
    net = defaultdict(int)
    for e, x in flow.items():
        if not x:
            continue
        tail, head = edges[e]
        net[tail] -= x
        net[head] += x
    return {v: x for v, x in net.items() if v not in terminals}


def cancel_cycles(flow: dict, edges: Mapping, tol: float = 0) -> dict:
    """Remove directed cycles from the support (in place on a copy)."""
    flow = {e: x for e, x in flow.items() if x > tol}
    while True:
        cycle = _find_cycle(flow, edges)
        if cycle is None:
            return flow
        amount = min(flow[e] for e in cycle)
        for e in cycle:
            flow[e] -= amount
            if flow[e] <= tol:
                del flow[e]


def _find_cycle(flow, edges):
    out = defaultdict(list)
    for e in sorted(flow, key=repr):
        out[edges[e][0]].append(e)
    color, parent_edge = {}, {}
    for root in sorted(out, key=repr):
        if root in color:
            continue
        stack = [(root, iter(out[root]))]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            e = next(it, None)
            if e is None:
                color[v] = 2
                stack.pop()
                continue
            w = edges[e][1]
            if color.get(w) == 1:
                cyc = [e]
                u = v
                while u != w:
                    pe = parent_edge[u]
                    cyc.append(pe)
                    u = edges[pe][0]
                return cyc
            if w not in color:
                color[w] = 1
                parent_edge[w] = e
                stack.append((w, iter(out[w])))
    return None


def decompose(flow: Mapping, edges: Mapping, sources: Iterable, sinks: Iterable,
              tol: float | None = None) -> list[WeightedPath]:
    """Decompose a conserving flow into source-to-sink paths.

    Cycles are cancelled first.  Paths are peeled in a deterministic order
    (sources and edges sorted by ``repr``) so runs are reproducible.
    """
    sources, sinks = set(sources), set(sinks)
    exact = _is_exact(flow.values())
    if tol is None:
        tol = 0 if exact else 1e-9
    if any(x < -tol for x in flow.values()):
        raise InputError("negative flow value")
    res = conservation_residual(flow, edges, sources | sinks)
    worst = max((abs(x) for x in res.values()), default=0)
    if worst > (0 if exact else max(tol, 1e-7)):
        raise InputError(f"flow does not conserve (residual {float(worst):.3g})")
    work = cancel_cycles(dict(flow), edges, tol)
    out = defaultdict(list)
    for e in sorted(work, key=repr):
        out[edges[e][0]].append(e)
    paths = []
    for s in sorted(sources, key=repr):
        while True:
            live = [e for e in out[s] if work.get(e, 0) > tol]
            if not live:
                break
            path, v = [], s
            while v not in sinks:
                nxt = [e for e in out[v] if work.get(e, 0) > tol]
                if not nxt:
                    break
                path.append(nxt[0])
                v = edges[nxt[0]][1]
            if v not in sinks or not path:
                # float residue stranded at an interior vertex
                for e in path or live[:1]:
                    work[e] = 0
                continue
            amount = min(work[e] for e in path)
            for e in path:
                work[e] -= amount
            paths.append(WeightedPath(tuple(path), amount))
    return paths


def recompose(paths: Iterable[WeightedPath]) -> dict:
    flow = defaultdict(int)
    for p in paths:
        for e in p.edges:
            flow[e] += p.weight
    return {e: x for e, x in flow.items() if x}


def unit_paths(flow: Mapping[Hashable, int], edges, sources, sinks) -> list[tuple]:
    """Decompose an integral flow into unit paths (edge tuples)."""
    out = []
    for p in decompose(flow, edges, sources, sinks, tol=0):
        out.extend([p.edges] * int(p.weight))
    return out


_SRC, _SNK = ("__super_source__",), ("__super_sink__",)


def max_flow_integral(edges: Mapping, capacities: Mapping, sources: Mapping | Iterable,
                      sinks: Iterable) -> tuple[int, dict]:
    """Maximum integral flow from ``sources`` to ``sinks``.

    ``sources`` may map a source to its supply cap (None = unbounded).  Each
    edge is routed through its own midpoint so parallel edges are fine.
    """
    if not isinstance(sources, Mapping):
        sources = {s: None for s in sources}
    g = nx.DiGraph()
    g.add_node(_SRC)
    g.add_node(_SNK)
    for e, (u, v) in edges.items():
        c = int(capacities.get(e, 0))
        if c < 0:
            raise InputError("capacities must be non-negative")
        if c == 0:
            continue
        g.add_edge(u, ("__e__", e), capacity=c)
        g.add_edge(("__e__", e), v, capacity=c)
    for s, cap in sources.items():
        if cap is None:
            g.add_edge(_SRC, s)
        elif cap > 0:
            g.add_edge(_SRC, s, capacity=int(cap))
    for t in sinks:
        g.add_edge(t, _SNK)
    value, fd = nx.maximum_flow(g, _SRC, _SNK)
    flow = {}
    for e, (u, v) in edges.items():
        mid = ("__e__", e)
        if mid in fd and fd[mid].get(v, 0):
            flow[e] = int(fd[mid][v])
    return int(value), flow


@dataclass
class Bucket:
    """Edge set whose integral mass must lie in [floor, ceil] of its fractional mass.

    All edges must share a head (edges into one sink) or all leave sources.
    """
    edges: tuple
    label: object = None


def _floor(x) -> int:
    return math.floor(Fraction(x))


def _ceil(x) -> int:
    return math.ceil(Fraction(x))


def quantize_flow(flow: Mapping, edges: Mapping, sources: Iterable, sinks: Iterable,
                  buckets: Iterable[Bucket] = (), targets: Mapping | None = None) -> dict:
    """Round a fractional flow to an integral one respecting bucket bounds.

    Every support edge gets bounds [floor, ceil] of its fractional value and
    each bucket gets [floor, ceil] of its fractional mass, enforced through a
    dummy vertex.  ``targets`` gives integral lower bounds on sink inflow; by
    default a sink keeps the ceiling of its fractional inflow.  The bounded
    flow polytope is integral, so an integral point exists whenever the
    fractional flow satisfies the bounds.
    """
    sources, sinks = set(sources), set(sinks)
    buckets = list(buckets)
    flow = {e: Fraction(x) for e, x in flow.items() if x}
    res = conservation_residual(flow, edges, sources | sinks)
    if any(res.values()):
        raise InputError("fractional flow does not conserve")
    inflow = defaultdict(Fraction)
    for e, x in flow.items():
        inflow[edges[e][1]] += x
    if targets is None:
        targets = {t: _ceil(inflow[t]) for t in sinks if inflow[t] > 0}

    head_dummy, src_dummy = {}, {}
    bounds = []  # (tail, head, lo, hi)
    for b_idx, b in enumerate(buckets):
        mass = sum((flow.get(e, Fraction(0)) for e in b.edges), Fraction(0))
        lo, hi = _floor(mass), _ceil(mass)
        heads = {edges[e][1] for e in b.edges}
        tails = {edges[e][0] for e in b.edges}
        node = ("__bucket__", b_idx)
        if len(heads) == 1 and not tails & sources:
            (h,) = heads
            for e in b.edges:
                if e in head_dummy:
                    raise InputError(f"edge {e!r} in two buckets")
                head_dummy[e] = node
            bounds.append((node, h, lo, hi))
        elif tails <= sources:
            for e in b.edges:
                if edges[e][0] in src_dummy:
                    raise InputError(f"source of edge {e!r} in two buckets")
                src_dummy[edges[e][0]] = node
            bounds.append((_SRC, node, lo, hi))
            for s in tails:
                bounds.append((node, s, 0, None))
        else:
            raise InputError("bucket edges must share a head or all leave sources")

    support = sorted(flow, key=repr)
    for e in support:
        u, v = edges[e]
        bounds.append((u, ("__e__", e), _floor(flow[e]), _ceil(flow[e])))
        bounds.append((("__e__", e), head_dummy.get(e, v), 0, None))
    for s in sorted(sources, key=repr):
        if s not in src_dummy:
            bounds.append((_SRC, s, 0, None))
    for t in sorted(sinks, key=repr):
        bounds.append((t, _SNK, int(targets.get(t, 0)), None))
    bounds.append((_SNK, _SRC, 0, None))

    result = _bounded_circulation(bounds)
    if result is None:
        culprit = None
        for b_idx, b in enumerate(buckets):
            mass = sum((flow.get(e, Fraction(0)) for e in b.edges), Fraction(0))
            if _floor(mass) > sum(_ceil(flow.get(e, 0)) for e in b.edges):
                culprit = b_idx
                break
        raise QuantizationError("bucket system infeasible", culprit)
    out = {}
    for e in support:
        x = result.get((edges[e][0], ("__e__", e)), 0)
        if x:
            out[e] = int(x)
    return out


def _bounded_circulation(bounds):
    """Feasible integral circulation with lower/upper bounds, or None."""
    big = 1 + sum(hi if hi is not None else lo for *_, lo, hi in bounds) * 2
    g = nx.DiGraph()
    excess = defaultdict(int)
    lows = {}
    for u, v, lo, hi in bounds:
        hi = big if hi is None else hi
        if lo > hi:
            return None
        key = (u, v)
        if key in lows:
            raise InputError("duplicate arc in circulation")
        lows[key] = lo
        g.add_edge(u, v, capacity=hi - lo)
        excess[v] += lo
        excess[u] -= lo
    s2, t2 = ("__S2__",), ("__T2__",)
    need = 0
    for v, x in excess.items():
        if x > 0:
            g.add_edge(s2, v, capacity=x)
            need += x
        elif x < 0:
            g.add_edge(v, t2, capacity=-x)
    if need == 0:
        return dict(lows)
    value, fd = nx.maximum_flow(g, s2, t2)
    if value < need:
        return None
    return {(u, v): lo + fd[u][v] for (u, v), lo in lows.items()}
