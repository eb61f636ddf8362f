"""Turning augmentation solutions into better assignments.

``structure_flow`` prunes a solution so that level one draws either only on
free resources or only on complex players, and the last level uses no
complex sources.  ``augment_once`` applies one such solution to the current
assignment, and ``solve_gap`` iterates until every basic player is covered.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .auggraph import AugInstance, AugSolution, build_aug_instance, check_feasible
from .config import SolverConfig, log2c
from .flowcore import Bucket, decompose, max_flow_integral, quantize_flow, unit_paths
from .instance import TOL, InputError
from .reduction import CanonicalInstance, ContractError, decanonicalize


# ---------------------------------------------------------------- structure

@dataclass
class UnitPath:
    level: int
    edges: tuple
    source: str
    sink: str
    weight: float = 0.0
    alive: bool = True


def _level_paths(aug: AugInstance, sol: AugSolution) -> list:
    out = []
    for i, lv in enumerate(aug.levels):
        g = {e: int(x) for e, x in sol.flows[i].items() if x}
        ps = []
        for edges in unit_paths(g, lv.edge_map, lv.sources, lv.sinks):
            ps.append(UnitPath(i, edges, lv.edges[edges[0]][0], lv.edges[edges[-1]][1]))
        ps.sort(key=lambda p: (p.source, p.edges))
        by_sink = defaultdict(list)
        for p in ps:
            by_sink[p.sink].append(p)
        for v, group in by_sink.items():
            f = lv.valuations.get(v)
            seen, prev = [], 0.0
            for p in group:
                seen.append(p.edges[-1])
                cur = lv.sink_value(v, seen) if f is not None else 0.0
                p.weight = cur - prev
                prev = cur
        out.append(ps)
    return out


@dataclass
class StructuredFlow:
    solution: AugSolution
    case: str  # "1a" | "1b" | "none"
    coverage: float  # f_t of level one after pruning
    marked: dict = field(default_factory=dict)  # (level, ct vertex) -> depth


def h_lower_bound(beta: float, n: int, gamma: float, alpha: float) -> float:
    ratio = gamma / (2 * alpha)
    if ratio <= 1:
        return math.inf
    return 1 + math.log(beta * n * n) / math.log(ratio)


def structure_flow(aug: AugInstance, sol: AugSolution, alpha: float, beta: float,
                   gamma: float, enforce_h: bool = False) -> StructuredFlow:
    """Prune a solution covering t into one of the two structured shapes."""
    h = aug.h
    if enforce_h and h < h_lower_bound(beta, aug.n, gamma, alpha):
        raise InputError("h is below the bound needed for the structure argument")
    paths = _level_paths(aug, sol)
    target = aug.target

    def is_cs(v):
        return v.startswith("cs:")

    def linked_ct(i, s):
        return next(iter(aug.linked_sinks(i, [s])), None)

    def kill(p):
        if not p.alive:
            return
        p.alive = False
        if is_cs(p.source) and not any(q.alive and q.source == p.source for q in paths[p.level]):
            t = linked_ct(p.level, p.source)
            if t is not None:
                for q in paths[p.level + 1]:
                    if q.sink == t:
                        kill(q)

    lvl0 = [p for p in paths[0] if p.sink == target]
    w_free = sum(p.weight for p in lvl0 if not is_cs(p.source))
    for p in paths[0]:
        if p.sink != target:
            kill(p)
    if w_free >= 1.0 / (2 * alpha) - TOL:
        case = "1a"
        for p in lvl0:
            if is_cs(p.source):
                p.alive = False
        for i in range(1, h):
            for p in paths[i]:
                p.alive = False
        marked = {}
    else:
        case = "1b"
        for p in lvl0:
            if not is_cs(p.source):
                kill(p)
        # keep exactly the subtree of t
        needed = set()
        for i in range(h):
            live_cs = {p.source for p in paths[i] if p.alive and is_cs(p.source)}
            need = {(i + 1, linked_ct(i, s)) for s in live_cs if linked_ct(i, s) is not None}
            if i + 1 < h:
                for p in paths[i + 1]:
                    if (i + 1, p.sink) not in need:
                        p.alive = False
            needed |= need
        marked = _mark_depths(aug, paths, kill)
        # anything left unmarked cannot be resolved within h levels; prune it upward
        changed = True
        while changed:
            changed = False
            for i in range(1, h):
                for v in {p.sink for p in paths[i] if p.alive}:
                    if (i, v) not in marked:
                        for p in paths[i]:
                            if p.sink == v and p.alive:
                                p.alive = False
                                changed = True
                        _drop_obligation(aug, paths, i, v, kill)
            # a cs source whose linked sink lost all its paths cannot be used
            for i in range(h):
                for p in paths[i]:
                    if p.alive and is_cs(p.source):
                        t = linked_ct(i, p.source)
                        if t is None:
                            p.alive = False
                            changed = True
                        elif not any(q.alive and q.sink == t for q in paths[i + 1]):
                            kill(p)
                            changed = True
    flows = []
    for i in range(h):
        g: dict = defaultdict(int)
        for p in paths[i]:
            if p.alive:
                for e in p.edges:
                    g[e] += 1
        flows.append(dict(g))
    lv0 = aug.levels[0]
    used_t = [e for e in lv0.delta(target) if flows[0].get(e, 0) > 0]
    cov = lv0.sink_value(target, used_t) if lv0.delta(target) else 1.0
    return StructuredFlow(AugSolution(flows, beta=sol.beta), case, cov, marked)


def _drop_obligation(aug, paths, i, v, kill):
    """Sink v at level i lost its paths: remove the level i-1 paths using its source."""
    s = aug.links[i - 1].get(v)
    for p in paths[i - 1]:
        if p.alive and p.source == s:
            kill(p)


def _mark_depths(aug: AugInstance, paths: list, kill) -> dict:
    h = aug.h
    frac = 1.0 / (2 * h)
    marked: dict = {}
    cs_depth: dict = {}  # (level, cs vertex) -> depth

    def weight_split(i, v, pred):
        live = [p for p in paths[i] if p.alive and p.sink == v]
        total = sum(p.weight for p in live)
        part = sum(p.weight for p in live if pred(p))
        return live, total, part

    depth = 1
    while depth <= h:
        new = []
        for i in range(1, h):
            for v in sorted({p.sink for p in paths[i] if p.alive}):
                if (i, v) in marked or not v.startswith("ct:"):
                    continue
                if depth == 1:
                    pred = (lambda p: not p.source.startswith("cs:"))
                else:
                    pred = (lambda p, i=i: cs_depth.get((i, p.source)) == depth - 1)
                live, total, part = weight_split(i, v, pred)
                if total > 0 and part > frac * total + TOL:
                    new.append((i, v, [p for p in live if not pred(p)]))
        if not new:
            if depth > 1 and not any(d == depth - 1 for d in cs_depth.values()):
                break
        for i, v, drop in new:
            marked[(i, v)] = depth
            cs_depth[(i - 1, aug.links[i - 1][v])] = depth
            for p in drop:
                kill(p)
        depth += 1
    return marked


def structure_properties(aug: AugInstance, sf: StructuredFlow, alpha: float) -> list:
    """Violations of the structural properties and the relaxed coverage."""
    errs = []
    h = aug.h
    lv0 = aug.levels[0]

    def used_sources(i):
        lv = aug.levels[i]
        return {s for s in lv.sources
                if (e := lv.source_edge(s)) is not None and sf.solution.flows[i].get(e, 0) > 0}

    s0 = used_sources(0)
    has_cs = any(s.startswith("cs:") for s in s0)
    has_free = any(s.startswith("s:") for s in s0)
    if has_cs and has_free:
        errs.append("level one uses both kinds of sources")
    if any(s.startswith("cs:") for s in used_sources(h - 1)):
        errs.append("last level uses complex sources")
    if sf.case != "none" and lv0.delta(aug.target) and sf.coverage < 1.0 / (2 * h * alpha) - TOL:
        errs.append(f"coverage {sf.coverage:.4g} below 1/(2h alpha)")
    verdict = check_feasible(aug, sf.solution, {aug.target} if sf.coverage > 0 else set(),
                             2 * h * alpha, sf.solution.beta)
    if not verdict.ok:
        errs.append(f"not feasible at coverage 2h alpha: {verdict}")
    return errs


# ---------------------------------------------------------------- assignment helpers

def uncovered_basic(canon: CanonicalInstance, sigma) -> list:
    held = defaultdict(list)
    for r, q in sigma.items():
        if q is not None:
            held[q].append(r)
    out = []
    for q in canon.basic:
        if canon.valuations[q].evaluate(held[q]) < 1 - TOL:
            out.append(q)
    return out


def complex_floor(canon: CanonicalInstance, sigma) -> float:
    vals = canon.instance.player_values(sigma)
    return min((vals[q] for q in canon.complex), default=1.0)


def _apply_paths(aug: AugInstance, sigma_bar: dict, flow: dict) -> dict:
    """Reassign each resource on a path to the player right after it."""
    lv = aug.levels[0]
    new = dict(sigma_bar)
    for p in decompose(flow, lv.edge_map, lv.sources, lv.sinks, tol=0):
        for e in p.edges:
            u, v = lv.edges[e]
            if u.startswith("r:") and (v.startswith("b:") or v.startswith("ct:")):
                new[aug.resource_of[u]] = v.split(":", 1)[1]
    return new


def top_up(canon: CanonicalInstance, sigma: dict) -> tuple[dict, int]:
    """Give unassigned resources to complex players below 1/gamma, best marginal first.

    Only touches resources nobody holds, so basic coverage is unchanged.
    """
    out = dict(sigma)
    need = 1.0 / canon.gamma - TOL
    free = sorted(r for r, q in out.items() if q is None)
    fed = 0
    for q in sorted(canon.complex):
        f = canon.valuations[q]
        bundle = [r for r, p in out.items() if p == q]
        val = f.evaluate(bundle)
        if val >= need:
            continue
        fed += 1
        while val < 1 - TOL and free:
            gains = [f.evaluate(bundle + [r]) - val for r in free]
            j = max(range(len(free)), key=lambda j: (gains[j], -j))
            gain, r = gains[j], free[j]
            if gain <= TOL:
                break
            bundle.append(r)
            free.remove(r)
            out[r] = q
            val += gain
    return out, fed


def floor_bound(alpha, beta, h, gamma, k) -> float:
    return 1.0 / (8 * alpha * beta * h * h * k) - 4.0 * k / gamma


@dataclass
class AugmentResult:
    sigma: dict
    case: str
    before: int
    after: int
    n_repaired: int = 0
    coverage: float = 0.0
    floor: float = 0.0


def augment_once(canon: CanonicalInstance, sigma: dict, aug: AugInstance, sol: AugSolution,
                 alpha: float, beta: float, gamma: float, k: int) -> AugmentResult:
    before = len(uncovered_basic(canon, sigma))
    if aug.nothing_to_augment:
        return AugmentResult(dict(sigma), "none", before, before, floor=complex_floor(canon, sigma))
    verdict = check_feasible(aug, sol, {aug.target}, alpha, beta)
    if not verdict.ok:
        raise ContractError(f"augmentation solution infeasible: {verdict}")
    sf = structure_flow(aug, sol, alpha, beta, gamma)
    if sf.case == "1a":
        new, repaired = _augment_free(canon, sigma, aug, sf)
    else:
        new, repaired = _augment_complex(canon, sigma, aug, sf, beta, k), 0
    after = len(uncovered_basic(canon, new))
    return AugmentResult(new, sf.case, before, after, repaired, sf.coverage,
                         complex_floor(canon, new))


def _augment_free(canon, sigma, aug, sf):
    lv = aug.levels[0]
    g1 = sf.solution.flows[0]
    caps = {e: 1 for e, x in g1.items() if x > 0}
    srcs = [s for s in lv.sources if s.startswith("s:")]
    _, flow = max_flow_integral(lv.edge_map, caps, srcs, [aug.target])
    new = _apply_paths(aug, aug.sigma_bar, flow)
    repaired = 0
    for q in sorted(canon.complex):
        priv = canon.private[q]
        if new.get(priv) == q:
            continue
        old = [r for r, p in sigma.items() if p == q and r != priv]
        if not old:
            continue
        taken = [r for r in old if new.get(r) is not None and new[r] != q]
        if len(taken) >= 2:
            new[priv] = q
            repaired += 1
        else:
            for r in old:
                if r not in taken:
                    new[r] = q
    return new, repaired


def _augment_complex(canon, sigma, aug, sf, beta, k):
    lv = aug.levels[0]
    h = aug.h
    flows = sf.solution.flows
    g: dict = defaultdict(int)
    for gi in flows:
        for e, x in gi.items():
            g[e] += x
    X = sorted({q for q in canon.complex
                if (e := lv.source_edge(f"cs:{q}")) is not None and g.get(e, 0) > 0})
    Y = sorted(q for q in canon.complex
               if q not in X and sigma.get(canon.private[q]) != q)
    src_edge = {lv.edges[lv.source_edge(s)][1]: lv.source_edge(s)
                for s in lv.sources if s.startswith("s:")}
    buckets = []
    for q in X + Y:
        f = canon.valuations[q]
        if q in X:
            E = [e for e in lv.delta(f"ct:{q}") if g.get(e, 0) > 0]
            res = [aug.resource_of[lv.edges[e][0]] for e in E]
        else:
            res = sorted(r for r, p in sigma.items() if p == q)
            E = [src_edge[f"r:{r}"] for r in res if f"r:{r}" in src_edge]
            res = [aug.resource_of[lv.edges[e][1]] for e in E]
        groups = defaultdict(list)
        held, prev = [], 0.0
        for e, r in zip(E, res):
            held.append(r)
            cur = f.evaluate(held)
            m = cur - prev
            prev = cur
            idx = math.inf if m <= 0 else max(1, math.floor(-math.log2(m)) + 1)
            # 2^-(i-1) > m >= 2^-i
            if idx != math.inf:
                while 2.0 ** -idx > m:
                    idx += 1
                while idx > 1 and 2.0 ** -(idx - 1) <= m:
                    idx -= 1
            groups[idx].append(e)
        for idx in sorted(groups, key=lambda x: (x == math.inf, x)):
            buckets.append(Bucket(tuple(groups[idx]), (q, idx)))
    denom = Fraction(2 * (k + 1) * beta * h)
    frac = defaultdict(Fraction)
    for e, x in flows[0].items():
        frac[e] += Fraction(x, 2 * beta)
    for e, x in g.items():
        frac[e] += Fraction(x) / denom
    frac = {e: x for e, x in frac.items() if x}
    t_in = sum((x for e, x in frac.items() if lv.edges[e][1] == aug.target), Fraction(0))
    targets = {aug.target: math.ceil(t_in)}
    gq = quantize_flow(frac, lv.edge_map, lv.sources, lv.sinks, buckets, targets)
    new = _apply_paths(aug, aug.sigma_bar, gq)
    moved = {aug.resource_of[lv.edges[e][0]] for e, x in gq.items()
             if x and lv.edges[e][0].startswith("r:")}
    for q in Y:
        for r, p in sigma.items():
            if p == q and r not in moved and new.get(r) is None:
                new[r] = q
    return new


# ---------------------------------------------------------------- gap loop

@dataclass
class GapResult:
    status: str  # "success" | "reject" | "fail" | "budget"
    assignment: dict | None
    iterations: int
    records: list = field(default_factory=list)
    message: str = ""


class AugSolverBudget(RuntimeError):
    pass


def initial_assignment(canon: CanonicalInstance) -> dict:
    sigma = {r: None for r in canon.resources}
    for q, r in canon.private.items():
        sigma[r] = q
    return sigma


def lp_aug_solver(cfg: SolverConfig) -> Callable:
    """Solve the augmentation instance through the configuration LP and rounding."""
    from .clp import membership, uniform_budget
    from .rounding import RoundingError, round_all_levels

    def solve(aug: AugInstance):
        b = uniform_budget(aug, 0, 1.0)
        res = membership(aug, 0, [aug.target], b, cfg)
        if res.status == "hyperplane":
            return None
        if res.status == "budget":
            raise AugSolverBudget("membership iteration budget exhausted")
        try:
            rep = round_all_levels(aug, res.witness, float(cfg.beta), cfg.seed, cfg.round_attempts)
        except RoundingError as exc:
            raise AugSolverBudget(str(exc)) from exc
        return rep.solution
    return solve


def brute_aug_solver(aug: AugInstance):
    from .oracle import brute_aug
    return brute_aug(aug, [aug.target])


def solve_gap(canon: CanonicalInstance, cfg: SolverConfig, aug_solver: Callable | None = None,
              progress: Callable[[dict], None] | None = None) -> GapResult:
    if aug_solver is None:
        aug_solver = brute_aug_solver if cfg.aug_solver == "brute" else lp_aug_solver(cfg)
    sigma = initial_assignment(canon)
    records = []
    n_guess = 2 * len(canon.resources) + 3 * len(canon.players) + 1
    cap = cfg.max_augmentations
    if cap is None:
        cap = math.ceil(4 * cfg.h * cfg.alpha * cfg.beta * log2c(n_guess)) + len(canon.basic)
    k = 0
    while True:
        aug = build_aug_instance(canon, sigma, cfg.h)
        if aug.nothing_to_augment:
            break
        if k >= cap:
            return GapResult("fail", None, k, records, "iteration cap reached")
        k += 1
        try:
            sol = aug_solver(aug)
        except AugSolverBudget as exc:
            return GapResult("budget", None, k, records, f"iteration {k}: {exc}")
        if sol is None:
            return GapResult("reject", None, k, records, f"iteration {k}: no (1,1) solution")
        beta = max(1, sol.beta, max((max(g.values(), default=0) for g in sol.flows), default=0))
        res = augment_once(canon, sigma, aug, sol, cfg.alpha, beta, cfg.gamma, k)
        fed = 0
        if cfg.top_up:
            res.sigma, fed = top_up(canon, res.sigma)
            res.floor = complex_floor(canon, res.sigma)
        rec = {"iteration": k, "case": res.case, "uncovered_before": res.before,
               "uncovered_after": res.after, "coverage": res.coverage,
               "complex_floor": res.floor, "congestion": beta, "topped_up": fed}
        records.append(rec)
        if progress is not None:
            progress(rec)
        if res.after >= res.before:
            return GapResult("fail", None, k, records, f"iteration {k}: no progress")
        sigma = res.sigma
    try:
        decanonicalize(canon, sigma, strict=True)
    except ContractError as exc:
        return GapResult("fail", sigma, k, records, str(exc))
    return GapResult("success", sigma, k, records)


# ---------------------------------------------------------------- full pipeline

@dataclass
class SolveResult:
    status: str  # "success" | "reject" | "budget" | "trivial"
    eta_star: float
    assignment: dict  # original resource -> original player | None
    trace: list = field(default_factory=list)  # one dict per eta tried


def fill_leftovers(instance, assignment: dict) -> dict:
    """Hand every unassigned resource to the currently poorest player (ties by id)."""
    out = dict(assignment)
    vals = instance.player_values(out)
    for r in instance.resources:
        if out.get(r) is not None:
            continue
        p = min(instance.players, key=lambda q: (vals[q], q))
        out[r] = p
        vals[p] = instance.value(p, [x for x, q in out.items() if q == p])
    return out


def solve_allocation(instance, cfg: SolverConfig,
                     progress: Callable[[dict], None] | None = None) -> SolveResult:
    """Binary search over eta; at each eta solve the gap problem on the canonical instance."""
    from .reduction import binary_search_solve, canonicalize, eta_grid

    trace: list = []

    def at_eta(scaled, eta):
        canon = canonicalize(scaled, cfg.gamma)
        res = solve_gap(canon, cfg, progress=progress)
        entry = {"eta": eta, "status": res.status, "iterations": res.iterations,
                 "message": res.message, "records": res.records}
        trace.append(entry)
        if progress is not None:
            progress({"kind": "eta", **{k: v for k, v in entry.items() if k != "records"}})
        if res.status != "success":
            return None
        return decanonicalize(canon, res.assignment, strict=True)

    if not eta_grid(instance, cfg.search_steps):
        return SolveResult("trivial", 0.0, fill_leftovers(instance, instance.empty_assignment()),
                           trace)
    sr = binary_search_solve(instance, at_eta, cfg.search_steps)
    assignment = fill_leftovers(instance, sr.assignment)
    if sr.eta_star > 0:
        status = "success"
    elif any(t["status"] == "budget" for t in trace):
        status = "budget"
    else:
        status = "reject"
    return SolveResult(status, sr.eta_star, assignment, trace)
