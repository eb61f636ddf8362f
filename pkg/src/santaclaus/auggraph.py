"""Multi-level augmentation instances and the construction I(sigma, h).

Vertex names are strings: ``r:<resource>``, ``b:<basic player>``,
``cs:<complex player>`` (source copy), ``ct:<complex player>`` (sink copy),
``t`` and ``s:<resource>`` for unassigned resources.  Edge ids are integers,
stable across levels of I(sigma, h) because all levels share one graph.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from .instance import TOL, AdditiveOracle, InputError, RelabeledOracle
from .reduction import CanonicalInstance


@dataclass
class Level:
    edges: list  # edge id -> (tail, head)
    sources: list
    sinks: list
    valuations: dict  # sink -> oracle whose ground is the sink's in-edge ids

    def __post_init__(self):
        self.in_edges = defaultdict(list)
        self.out_edges = defaultdict(list)
        for e, (u, v) in enumerate(self.edges):
            self.out_edges[u].append(e)
            self.in_edges[v].append(e)
        self.source_set = frozenset(self.sources)
        self.sink_set = frozenset(self.sinks)

    @property
    def edge_map(self) -> dict:
        return dict(enumerate(self.edges))

    @property
    def vertices(self) -> set:
        vs = set(self.sources) | set(self.sinks)
        for u, v in self.edges:
            vs.add(u)
            vs.add(v)
        return vs

    def delta(self, v) -> list:
        return self.in_edges.get(v, [])

    def sink_value(self, v, edge_set) -> float:
        """f_v on a set of in-edges; a sink without in-edges can never be covered."""
        f = self.valuations.get(v)
        if f is None or not self.delta(v):
            return 0.0
        return f.evaluate(edge_set)

    def source_edge(self, s):
        out = self.out_edges.get(s, [])
        return out[0] if out else None

    def check(self) -> None:
        if self.source_set & self.sink_set:
            raise InputError("sources and sinks must be disjoint")
        for s in self.sources:
            if len(self.out_edges.get(s, [])) > 1 or self.in_edges.get(s):
                raise InputError(f"source {s!r} must have at most one out-edge and no in-edges")
        for t in self.sinks:
            if self.out_edges.get(t):
                raise InputError(f"sink {t!r} has outgoing edges")
            f = self.valuations.get(t)
            if f is not None and set(f.ground) != set(self.delta(t)):
                raise InputError(f"valuation of sink {t!r} is not over its in-edges")


@dataclass
class AugInstance:
    levels: list  # 0-based: levels[0] is the first level
    links: list  # links[i]: sink of level i+1 -> source of level i
    target: str = "t"
    resource_of: dict = field(default_factory=dict)  # vertex name -> resource id
    sigma_bar: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.levels:
            raise InputError("need at least one level")
        if len(self.links) != len(self.levels) - 1:
            raise InputError("need one linking map between consecutive levels")
        for i, link in enumerate(self.links):
            if len(set(link.values())) != len(link):
                raise InputError(f"linking edges of level {i} are not a matching")
            for t, s in link.items():
                if t not in self.levels[i + 1].sink_set or s not in self.levels[i].source_set:
                    raise InputError(f"linking edge {t!r}->{s!r} has missing endpoints")
        for lv in self.levels:
            lv.check()

    @property
    def h(self) -> int:
        return len(self.levels)

    @property
    def n(self) -> int:
        return sum(len(lv.vertices) for lv in self.levels)

    @property
    def nothing_to_augment(self) -> bool:
        return not self.levels[0].delta(self.target)

    def linked_sinks(self, i: int, sources) -> set:
        """L_i^{-1}: sinks of level i+1 linked to the given sources of level i."""
        if i + 1 >= self.h:
            return set()
        inv = {s: t for t, s in self.links[i].items()}
        return {inv[s] for s in sources if s in inv}

    def to_json(self) -> dict:
        return {
            "h": self.h,
            "target": self.target,
            "levels": [{
                "edges": [list(e) for e in lv.edges],
                "sources": list(lv.sources),
                "sinks": list(lv.sinks),
            } for lv in self.levels],
            "links": [sorted([t, s] for t, s in link.items()) for link in self.links],
        }


@dataclass
class AugSolution:
    flows: list  # per level {edge id: int}
    beta: int = 1

    def used_sources(self, aug: AugInstance, i: int) -> set:
        lv = aug.levels[i]
        return {s for s in lv.sources
                if (e := lv.source_edge(s)) is not None and self.flows[i].get(e, 0) > 0}


def sigma_bar(canon: CanonicalInstance, sigma: Mapping) -> dict:
    """Keep only assignments of value-1 resources (complex players drop small ones)."""
    out = {}
    for r in canon.resources:
        q = sigma.get(r)
        if q is not None and canon.valuations[q].evaluate([r]) >= 1 - TOL:
            out[r] = q
        else:
            out[r] = None
    return out


def build_aug_instance(canon: CanonicalInstance, sigma: Mapping, h: int) -> AugInstance:
    if h < 1:
        raise InputError("h must be at least 1")
    sb = sigma_bar(canon, sigma)
    singles = {q: dict(zip(canon.valuations[q].ground, canon.valuations[q].singletons()))
               for q in canon.players}
    held = defaultdict(list)
    for r in canon.resources:
        if sb[r] is not None:
            held[sb[r]].append(r)

    edges = []
    for r in canon.resources:
        for q in canon.basic:
            if singles[q][r] > 0 and sb[r] != q:
                edges.append((f"r:{r}", f"b:{q}"))
        for q in canon.complex:
            if singles[q][r] > 0 and sb[r] != q:
                edges.append((f"r:{r}", f"ct:{q}"))
    for q in canon.basic:
        for r in held[q]:
            edges.append((f"b:{q}", f"r:{r}"))
    for q in canon.complex:
        for r in held[q]:
            edges.append((f"cs:{q}", f"r:{r}"))
    free = [r for r in canon.resources if sb[r] is None]
    for r in free:
        edges.append((f"s:{r}", f"r:{r}"))
    for q in canon.basic:
        if not held[q]:
            edges.append((f"b:{q}", "t"))

    sources = [f"s:{r}" for r in free] + [f"cs:{q}" for q in canon.complex]
    sinks = ["t"] + [f"ct:{q}" for q in canon.complex]
    in_edges = defaultdict(list)
    for e, (u, v) in enumerate(edges):
        in_edges[v].append(e)
    vals: dict = {}
    dt = in_edges["t"]
    if dt:
        vals["t"] = AdditiveOracle(dt, {e: 1.0 / len(dt) for e in dt})
    for q in canon.complex:
        d = in_edges[f"ct:{q}"]
        if d:
            vals[f"ct:{q}"] = RelabeledOracle(canon.valuations[q],
                                              {e: edges[e][0][2:] for e in d})
    levels = [Level(list(edges), list(sources), list(sinks), vals) for _ in range(h)]
    links = [{f"ct:{q}": f"cs:{q}" for q in canon.complex} for _ in range(h - 1)]
    resource_of = {f"r:{r}": r for r in canon.resources}
    return AugInstance(levels, links, "t", resource_of, sb)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    kind: str = ""  # conservation | congestion | coverage | shape
    level: int = -1
    where: object = None
    detail: str = ""


def covered(lv: Level, v, flow: Mapping, alpha: float) -> bool:
    used = [e for e in lv.delta(v) if flow.get(e, 0) > 0]
    return lv.sink_value(v, used) >= 1.0 / alpha - TOL


def check_feasible(aug: AugInstance, sol: AugSolution, t_star, alpha: float,
                   beta: float) -> Verdict:
    if len(sol.flows) != aug.h:
        return Verdict(False, "shape", detail="solution levels do not match instance")
    required = set(t_star)
    for i, lv in enumerate(aug.levels):
        g = sol.flows[i]
        net = defaultdict(int)
        for e, x in g.items():
            if not (0 <= e < len(lv.edges)):
                return Verdict(False, "shape", i, e, "edge outside level")
            if x < 0:
                return Verdict(False, "congestion", i, e, "negative flow")
            if x > beta + TOL:
                return Verdict(False, "congestion", i, e, f"flow {x} > {beta}")
            u, v = lv.edges[e]
            net[u] -= x
            net[v] += x
        for v, x in net.items():
            if v not in lv.source_set and v not in lv.sink_set and abs(x) > TOL:
                return Verdict(False, "conservation", i, v, f"net inflow {x}")
        for v in sorted(required):
            if v not in lv.sink_set:
                return Verdict(False, "shape", i, v, "required vertex is not a sink")
            if v == aug.target and not lv.delta(v):
                continue  # nothing to augment: t is vacuously covered
            if not covered(lv, v, g, alpha):
                return Verdict(False, "coverage", i, v)
        required = aug.linked_sinks(i, sol.used_sources(aug, i))
    return Verdict(True)


def level_cost(aug: AugInstance, sol: AugSolution) -> int:
    return sum(sum(g.values()) for g in sol.flows)


def normalize_optimum(canon: CanonicalInstance, sb: Mapping, opt: Mapping) -> dict:
    """Reshape a value-1 canonical optimum for the flow-existence construction.

    Basic players keep one value-1 resource (their sigma-bar one if possible),
    complex players keep either their private resource or their bundle minus
    zero-value resources, and resources that sigma-bar assigns but the optimum
    leaves free are handed back to their holder.
    """
    held = defaultdict(list)
    for r, q in sb.items():
        if q is not None:
            held[q].append(r)
    for q in canon.basic:
        if len(held[q]) > 1:
            raise InputError(f"sigma-bar gives basic player {q!r} several resources")
    bundles = {q: set() for q in canon.players}
    for r, q in opt.items():
        if q is not None:
            bundles[q].add(r)
    for q in canon.players:
        f = canon.valuations[q]
        if canon.is_basic(q):
            good = [r for r in sorted(bundles[q]) if f.evaluate([r]) >= 1 - TOL]
            if not good:
                raise InputError(f"optimum does not cover {q!r}")
            keep = held[q][0] if held[q] and held[q][0] in good else good[0]
            bundles[q] = {keep}
        else:
            priv = canon.private[q]
            if priv in bundles[q]:
                bundles[q] = {priv}
            else:
                bundles[q] = {r for r in bundles[q] if f.evaluate([r]) > 0}
    while True:
        owner = {r: q for q, b in bundles.items() for r in b}
        stray = [r for r in canon.resources if sb.get(r) is not None and r not in owner]
        if not stray:
            return {r: owner.get(r) for r in canon.resources}
        r = stray[0]
        bundles[sb[r]] = {r}


def flow_from_optimum(canon: CanonicalInstance, aug: AugInstance, opt: Mapping) -> AugSolution:
    """The flow that mimics a value-1 optimum, identical on every level."""
    sb = aug.sigma_bar
    opt = normalize_optimum(canon, sb, opt)
    lv = aug.levels[0]
    g = {}
    for e, (u, v) in enumerate(lv.edges):
        x = 0
        if v == "t":
            x = 1
        elif u.startswith("s:"):
            x = int(opt[u[2:]] is not None)
        elif u.startswith("r:"):
            q = v.split(":", 1)[1]
            x = int(opt[u[2:]] == q)
        else:  # player -> resource
            r = v[2:]
            x = int(sb[r] != opt[r])
        if x:
            g[e] = x
    return AugSolution([dict(g) for _ in range(aug.h)], beta=1)
