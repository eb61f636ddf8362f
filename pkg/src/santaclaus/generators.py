"""Instance families for experiments and tests.

Planted families know their optimum by construction: every player gets value
exactly 1 from its planted bundle, and one anchor player values nothing
outside its bundle, so no allocation beats 1.  Values are multiples of a
power-of-two denominator so these sums are exact in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import AdditiveOracle, CoverageOracle, InputError, Instance

FAMILIES = ("planted-additive", "planted-coverage", "random-additive",
            "restricted-assignment", "adversarial-private-resource")


@dataclass
class Generated:
    instance: Instance
    opt: float | None = None
    planted: dict | None = None  # resource -> player

    def sidecar(self, family: str, players: int, resources: int, seed: int) -> dict:
        return {"format_version": 1, "family": family,
                "params": {"players": players, "resources": resources},
                "seed": seed, "opt": self.opt, "planted_assignment": self.planted}


def _denominator(m: int) -> int:
    d = 16
    while d < m:
        d *= 2
    return d


def _composition(rng, total: int, parts: int) -> list:
    """Random split of ``total`` units into ``parts`` positive integers."""
    cuts = sorted(rng.choice(np.arange(1, total), size=parts - 1, replace=False).tolist())
    bounds = [0] + cuts + [total]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def _ids(k: int, m: int):
    return [f"p{i}" for i in range(k)], [f"r{j}" for j in range(m)]


def _bundles(rng, players, resources) -> dict:
    order = rng.permutation(len(resources)).tolist()
    k = len(players)
    out = {p: [] for p in players}
    for pos, j in enumerate(order):
        # the first k resources seed one bundle each, the rest land anywhere
        p = players[pos] if pos < k else players[int(rng.integers(k))]
        out[p].append(resources[j])
    return out


def planted_additive(k: int, m: int, seed: int) -> Generated:
    rng = np.random.default_rng(seed)
    players, resources = _ids(k, m)
    D = _denominator(m)
    bundles = _bundles(rng, players, resources)
    vals = {}
    for i, p in enumerate(players):
        own = bundles[p]
        v = dict(zip(own, (u / D for u in _composition(rng, D, len(own)))))
        if i > 0:  # decoys on foreign resources; the anchor p0 has none
            for r in resources:
                if r not in v and rng.random() < 0.5:
                    v[r] = int(rng.integers(1, D // 2 + 1)) / D
        vals[p] = AdditiveOracle(resources, v)
    planted = {r: p for p, b in bundles.items() for r in b}
    return Generated(Instance(players, resources, vals), 1.0, planted)


def planted_coverage(k: int, m: int, seed: int) -> Generated:
    rng = np.random.default_rng(seed)
    players, resources = _ids(k, m)
    D = _denominator(m + 2)
    bundles = _bundles(rng, players, resources)
    vals = {}
    for i, p in enumerate(players):
        own = bundles[p]
        n_items = len(own) + int(rng.integers(0, 3))
        items = [f"{p}:u{j}" for j in range(n_items)]
        weights = dict(zip(items, (u / D for u in _composition(rng, D, n_items))))
        covers = {r: set() for r in own}
        for j, u in enumerate(items):
            # every item is covered by some bundle resource, some by two
            covers[own[j % len(own)]].add(u)
            if rng.random() < 0.3:
                covers[own[int(rng.integers(len(own)))]].add(u)
        if i > 0:
            for r in resources:
                if r not in covers and rng.random() < 0.5:
                    u = f"{p}:d{r}"
                    weights[u] = int(rng.integers(1, D // 2 + 1)) / D
                    covers[r] = {u}
        vals[p] = CoverageOracle(resources, {r: sorted(c) for r, c in covers.items()}, weights)
    planted = {r: p for p, b in bundles.items() for r in b}
    return Generated(Instance(players, resources, vals), 1.0, planted)


def random_additive(k: int, m: int, seed: int) -> Generated:
    rng = np.random.default_rng(seed)
    players, resources = _ids(k, m)
    D = _denominator(m)
    vals = {p: AdditiveOracle(resources, {r: int(rng.integers(0, D + 1)) / D for r in resources})
            for p in players}
    return Generated(Instance(players, resources, vals))


def restricted_assignment(k: int, m: int, seed: int) -> Generated:
    """Each resource has one value; each player wants it or not."""
    rng = np.random.default_rng(seed)
    players, resources = _ids(k, m)
    D = _denominator(m)
    size = {r: int(rng.integers(1, D + 1)) / D for r in resources}
    vals = {}
    for p in players:
        liked = [r for r in resources if rng.random() < 0.5] or [resources[int(rng.integers(m))]]
        vals[p] = AdditiveOracle(resources, {r: size[r] for r in liked})
    return Generated(Instance(players, resources, vals))


def adversarial_private_resource(k: int, m: int, seed: int) -> Generated:
    """k-1 big resources everybody wants, plus private small resources per player.

    Since bigs are scarcer than players, someone must live on its smalls,
    which are worth exactly 1 in total, so the optimum is 1.
    """
    if k < 2 or m < 2 * k - 1:
        raise InputError("adversarial-private-resource needs players >= 2 and resources >= 2*players-1")
    rng = np.random.default_rng(seed)
    players, resources = _ids(k, m)
    bigs = resources[:k - 1]
    rest = resources[k - 1:]
    per = len(rest) // k
    D = _denominator(per)
    small = {p: rest[i * per:(i + 1) * per] for i, p in enumerate(players)}
    vals = {}
    for p in players:
        v = {r: 1.0 for r in bigs}
        v.update(zip(small[p], (u / D for u in _composition(rng, D, per))))
        vals[p] = AdditiveOracle(resources, v)
    planted = {r: None for r in resources}
    for p, r in zip(players, bigs):
        planted[r] = p
    for r in small[players[-1]]:
        planted[r] = players[-1]
    return Generated(Instance(players, resources, vals), 1.0, planted)


def generate(family: str, players: int, resources: int, seed: int) -> Generated:
    if players < 1:
        raise InputError("players must be at least 1")
    if resources < players and family != "random-additive":
        raise InputError("need at least as many resources as players")
    try:
        fn = {"planted-additive": planted_additive, "planted-coverage": planted_coverage,
              "random-additive": random_additive,
              "restricted-assignment": restricted_assignment,
              "adversarial-private-resource": adversarial_private_resource}[family]
    except KeyError:
        raise InputError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}") from None
    return fn(players, resources, seed)
