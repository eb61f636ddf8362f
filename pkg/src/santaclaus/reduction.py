"""Canonical instances and the binary search over the target value."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

from .instance import (TOL, ComplexPlayerOracle, IndicatorOracle, InputError, Instance)


class ContractError(RuntimeError):
    pass


def basic_id(p: str) -> str:
    return f"{p}'"


def complex_id(p: str) -> str:
    return f"{p}''"


def private_id(p: str) -> str:
    return f"r({p}'')"


@dataclass
class CanonicalInstance:
    original: Instance
    gamma: float
    basic: list
    complex: list
    private: dict  # complex player -> private resource
    big: dict  # original player -> frozenset of big resources
    owner: dict  # canonical player -> original player
    instance: Instance = field(repr=False)

    @property
    def resources(self) -> list:
        return self.instance.resources

    @property
    def players(self) -> list:
        return self.instance.players

    @property
    def valuations(self) -> dict:
        return self.instance.valuations

    def is_basic(self, q: str) -> bool:
        return q in self._basic_set

    def __post_init__(self):
        self._basic_set = frozenset(self.basic)

    def partner(self, q: str) -> str:
        p = self.owner[q]
        return complex_id(p) if self.is_basic(q) else basic_id(p)


def canonicalize(instance: Instance, gamma: float) -> CanonicalInstance:
    """Split each player into a basic and a complex player with a private resource.

    The instance must already be scaled so that the target value is 1.
    """
    if gamma < 1:
        raise InputError("gamma must be at least 1")
    privates = {p: private_id(p) for p in instance.players}
    clash = set(privates.values()) & set(instance.resources)
    if clash:
        raise InputError(f"resource ids clash with private resource names: {sorted(clash)}")
    resources = list(instance.resources) + [privates[p] for p in instance.players]
    basic, cplx, private, big, owner, vals = [], [], {}, {}, {}, {}
    for p in instance.players:
        f = instance.valuations[p]
        single = f.singletons()
        bigs = frozenset(r for r, v in zip(f.ground, single) if v >= 1.0 / gamma - TOL)
        big[p] = bigs
        b, c = basic_id(p), complex_id(p)
        basic.append(b)
        cplx.append(c)
        private[c] = privates[p]
        owner[b] = owner[c] = p
        vals[b] = IndicatorOracle(resources, bigs | {privates[p]})
        vals[c] = ComplexPlayerOracle(resources, f, privates[p], bigs)
    inst = Instance(basic + cplx, resources, vals)
    return CanonicalInstance(instance, gamma, basic, cplx, private, big, owner, inst)


def decanonicalize(canon: CanonicalInstance, assignment: Mapping, strict: bool = True) -> dict:
    """Map a canonical assignment back to the original players.

    Player p receives every original resource held by p' or p''.  With
    ``strict`` each pair must reach value 1/gamma, otherwise ContractError.
    """
    threshold = 1.0 / canon.gamma - TOL
    if strict:
        vals = canon.instance.player_values(assignment)
        for p in canon.original.players:
            b, c = basic_id(p), complex_id(p)
            if vals[b] < threshold or vals[c] < threshold:
                raise ContractError(f"pair for player {p!r} is not covered")
    out = {r: None for r in canon.original.resources}
    for r, q in assignment.items():
        if q is None or r not in out:
            continue
        out[r] = canon.owner[q]
    return out


def canonical_from_original(canon: CanonicalInstance, assignment: Mapping) -> dict:
    """The forward map: a value-1 original solution becomes a value-1 canonical one."""
    out = {r: None for r in canon.resources}
    bundles = canon.original.bundles(assignment)
    for p, bundle in bundles.items():
        b, c = basic_id(p), complex_id(p)
        bigs = sorted(bundle & canon.big[p])
        if bigs:
            out[bigs[0]] = b
            out[private_id(p)] = c
            for r in bundle - {bigs[0]}:
                out[r] = c
        else:
            out[private_id(p)] = b
            for r in bundle:
                out[r] = c
    return out


@dataclass
class SearchResult:
    eta_star: float
    assignment: dict
    trace: list  # (eta, success) in evaluation order


def eta_grid(instance: Instance, steps: int = 40) -> list:
    """Geometric grid with ratio 2, descending from min_p f_p(R)."""
    hi = min(instance.value(p, instance.resources) for p in instance.players)
    if hi <= 0:
        return []
    return [hi / 2 ** k for k in range(steps)]


def binary_search_solve(instance: Instance, solver: Callable[[Instance, float], Optional[dict]],
                        steps: int = 40) -> SearchResult:
    """Largest grid value eta at which ``solver`` succeeds, with its allocation.

    ``solver(scaled_instance, eta)`` gets the instance divided by eta and returns
    an assignment or None.  Success is assumed monotone along the grid.
    """
    grid = eta_grid(instance, steps)
    trace = []
    best: tuple[float, dict] | None = None

    def attempt(k):
        nonlocal best
        eta = grid[k]
        res = solver(instance.scaled(eta), eta)
        trace.append((eta, res is not None))
        if res is not None and (best is None or eta > best[0]):
            best = (eta, res)
        return res is not None

    # grid[0] is an upper bound on OPT; try it first, then bisect
    if grid and not attempt(0):
        lo, hi = 0, len(grid)  # invariant: grid[lo] fails; grid[hi] succeeds or hi is past the end
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if attempt(mid):
                hi = mid
            else:
                lo = mid
    if best is None:
        return SearchResult(0.0, instance.empty_assignment(), trace)
    return SearchResult(best[0], best[1], trace)

