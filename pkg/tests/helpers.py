"""Small instance builders shared by the test modules."""

import numpy as np

from santaclaus.auggraph import build_aug_instance
from santaclaus.augment import initial_assignment
from santaclaus.generators import planted_additive, planted_coverage
from santaclaus.instance import (AdditiveOracle, CoverageOracle, ExplicitTableOracle, Instance,
                                 TruncatedAdditiveOracle, all_subset_values)
from santaclaus.reduction import canonical_from_original, canonicalize

KINDS = ("additive", "weighted-coverage", "truncated-additive", "explicit-table")


def random_oracle(kind, ground, rng):
    n = len(ground)
    if kind == "additive":
        return AdditiveOracle(ground, {r: float(rng.random()) for r in ground})
    if kind == "truncated-additive":
        vals = {r: float(rng.random()) for r in ground}
        return TruncatedAdditiveOracle(ground, vals, float(rng.random() * n / 2))
    if kind == "weighted-coverage":
        universe = [f"u{j}" for j in range(int(rng.integers(1, 2 * n + 2)))]
        covers = {r: [u for u in universe if rng.random() < 0.4] for r in ground}
        return CoverageOracle(ground, covers, {u: float(rng.random()) for u in universe})
    # explicit tables re-materialise a coverage function, which is submodular
    base = random_oracle("weighted-coverage", ground, rng)
    vals = all_subset_values(base)
    table = {frozenset(r for j, r in enumerate(ground) if c >> j & 1): float(vals[c])
             for c in range(1 << n)}
    return ExplicitTableOracle(ground, table)


def random_additive_instance(k, m, rng, density=0.6):
    players = [f"p{i}" for i in range(k)]
    resources = [f"r{j}" for j in range(m)]
    vals = {p: AdditiveOracle(resources, {r: round(float(rng.random()), 3) for r in resources
                                          if rng.random() < density})
            for p in players}
    return Instance(players, resources, vals)


def planted_canonical(seed, k=2, m=4, gamma=8.0, coverage=False):
    """Canonical instance of a planted value-1 instance with its canonical optimum."""
    gen = (planted_coverage if coverage else planted_additive)(k, m, seed)
    canon = canonicalize(gen.instance, gamma)
    opt = canonical_from_original(canon, gen.planted)
    return canon, opt


def planted_aug(seed, h=1, k=2, m=4, gamma=8.0, sigma=None, coverage=False):
    canon, opt = planted_canonical(seed, k, m, gamma, coverage)
    sigma = initial_assignment(canon) if sigma is None else sigma
    return canon, opt, build_aug_instance(canon, sigma, h)


def rng_for(seed):
    return np.random.default_rng(seed)


def random_tiny_aug(rng, h, max_edges=8):
    """Generic augmentation instance with one linked source per level pair.

    Every level has sources s0, s1, c, interior x0, x1 and sinks t, u; the
    sink u of level i+1 is linked to c of level i.  Sink values are
    multiples of 1/4 so coverage thresholds are hit exactly.
    """
    from santaclaus.auggraph import AugInstance, Level
    levels = []
    for _ in range(h):
        edges = []
        for s in ("s0", "s1", "c"):
            edges.append((s, str(rng.choice(["x0", "x1", "t", "u"]))))
        if rng.random() < 0.5:
            edges.append(("x0", "x1"))
        for x in ("x0", "x1"):
            for t in ("t", "u"):
                if rng.random() < 0.5 and len(edges) < max_edges:
                    edges.append((x, t))
        vals = {}
        for t in ("t", "u"):
            d = [e for e, (_, v) in enumerate(edges) if v == t]
            if not d:
                continue
            w = {e: int(rng.integers(1, 5)) / 4 for e in d}
            if rng.random() < 0.5:
                vals[t] = TruncatedAdditiveOracle(d, w, 1.0)
            else:
                vals[t] = AdditiveOracle(d, w)
        levels.append(Level(edges, ["s0", "s1", "c"], ["t", "u"], vals))
    links = [{"u": "c"} for _ in range(h - 1)]
    return AugInstance(levels, links)


def integral_budget_points(aug, level, sinks, alpha=1, beta=1):
    """Usage vectors of every integral nested solution for ``sinks`` (one config per sink)."""
    from santaclaus.oracle import _linked, _used_sources, enumerate_configurations
    sinks = sorted(sinks)
    if not sinks:
        yield {}
        return
    v, rest = sinks[0], sinks[1:]
    for g in enumerate_configurations(aug, level, v, alpha, beta):
        nxt = _linked(aug, level, _used_sources(aug.levels[level], g))
        for sub in integral_budget_points(aug, level + 1, nxt, alpha, beta):
            for tail in integral_budget_points(aug, level, rest, alpha, beta):
                u = dict(tail)
                for k, x in sub.items():
                    u[k] = u.get(k, 0) + x
                for e, x in g.items():
                    u[(level, e)] = u.get((level, e), 0) + x
                yield u


def box_optimum(f, k):
    """max F over {x in [0,1]^n : sum x <= k}, by enumerating the polytope's vertices.

    F is convex along e_i - e_j and monotone, so an optimum has floor(k)
    coordinates at 1 and at most one more at k - floor(k).
    """
    import itertools
    from santaclaus.sep import multilinear_exact
    n = len(f.ground)
    k = min(float(k), n)
    whole, frac = int(k), k - int(k)
    best = 0.0
    for S in itertools.combinations(range(n), whole):
        x = np.zeros(n)
        x[list(S)] = 1
        extra = [j for j in range(n) if j not in S] if frac > 0 else []
        for j in extra or [None]:
            y = x.copy()
            if j is not None:
                y[j] = frac
            best = max(best, multilinear_exact(f, y))
    return best


def hub_witness(n_sinks=20, n_configs=4, hubs=4):
    """Two-level synthetic witness whose columns share hub edges on both levels.

    Config k of sink j crosses hub (j + k) % hubs on level one; its linked
    sub-sink crosses hub (j + 2k) % hubs on level two.  All weights are
    1/n_configs, so every hub edge carries expected load n_sinks/hubs.
    """
    from santaclaus.auggraph import AugInstance, Level
    from santaclaus.clp import Column, Witness, unit_witness

    def level(prefix, sink_name, pairs):
        edges, eid = [], {}

        def edge(u, v):
            if (u, v) not in eid:
                eid[(u, v)] = len(edges)
                edges.append((u, v))
            return eid[(u, v)]

        cols = {}
        for (j, k), m in pairs.items():
            src = f"{prefix}{j}_{k}"
            cols[(j, k)] = {edge(src, f"x{m}"): 1, edge(f"x{m}", f"y{m}"): 1,
                            edge(f"y{m}", sink_name(j, k)): 1}
        sources = [f"{prefix}{j}_{k}" for (j, k) in pairs]
        sinks = sorted({sink_name(j, k) for (j, k) in pairs})
        return Level(edges, sources, sinks, {}), cols

    top = {(j, k): (j + k) % hubs for j in range(n_sinks) for k in range(n_configs)}
    deep = {(j, k): (j + 2 * k) % hubs for j in range(n_sinks) for k in range(n_configs)}
    lv0, g0 = level("c", lambda j, k: f"t{j}", top)
    lv1, g1 = level("d", lambda j, k: f"u{j}_{k}", deep)
    links = [{f"u{j}_{k}": f"c{j}_{k}" for (j, k) in top}]
    aug = AugInstance([lv0, lv1], links)
    cols, wts = [], []
    for (j, k), g in g0.items():
        sub = unit_witness(1, [Column(f"u{j}_{k}", 1, g1[(j, k)])])
        cols.append(Column(f"t{j}", 0, g, sub))
        wts.append(1.0 / n_configs)
    return aug, Witness(0, tuple(f"t{j}" for j in range(n_sinks)), cols, wts)
