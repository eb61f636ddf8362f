"""Santa Claus instances and monotone submodular valuation oracles.

Every oracle works over an ordered ground set and evaluates batches of
bundles given as boolean masks, which keeps the multilinear sampling in
:mod:`santaclaus.sep` vectorised.  Single-bundle evaluation goes through the
same code path and bumps the query counter by one.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

TOL = 1e-9
MAX_EXHAUSTIVE_GROUND = 20

PlayerId = str
ResourceId = str
Assignment = dict  # ResourceId -> PlayerId | None, total over resources


class InputError(ValueError):
    """Malformed input: unknown ids, bad parameters, broken preconditions."""


class CapabilityError(RuntimeError):
    """Requested an exhaustive computation outside its supported size."""


class ValuationOracle:
    """Value-query access to a set function over ``ground``.

    Subclasses implement :meth:`_values`, mapping a ``(k, n)`` boolean mask
    array to ``k`` values.  Instances are immutable apart from the counter.
    """

    kind = "abstract"

    def __init__(self, ground: Sequence[Any]):
        self.ground = tuple(ground)
        if len(set(self.ground)) != len(self.ground):
            raise InputError("duplicate ids in ground set")
        self.index = {r: j for j, r in enumerate(self.ground)}
        self._queries = 0
        self._lock = threading.Lock()

    @property
    def queries(self) -> int:
        return self._queries

    def _count(self, k: int) -> None:
        with self._lock:
            self._queries += k

    def mask(self, bundle: Iterable[Any]) -> np.ndarray:
        m = np.zeros(len(self.ground), dtype=bool)
        for r in bundle:
            try:
                m[self.index[r]] = True
            except KeyError:
                raise InputError(f"unknown resource id {r!r}") from None
        return m

    def evaluate(self, bundle: Iterable[Any]) -> float:
        self._count(1)
        return float(self._values(self.mask(bundle)[None, :])[0])

    def evaluate_batch(self, masks: np.ndarray) -> np.ndarray:
        masks = np.asarray(masks, dtype=bool)
        if masks.ndim == 1:
            masks = masks[None, :]
        self._count(masks.shape[0])
        return np.asarray(self._values(masks), dtype=float)

    def marginal(self, base: Iterable[Any], r: Any) -> float:
        base = set(base)
        if r in base:
            raise InputError(f"{r!r} already in base set")
        return evaluate(self, base | {r}) - evaluate(self, base)

    def singletons(self) -> np.ndarray:
        return self.evaluate_batch(np.eye(len(self.ground), dtype=bool))

    def _values(self, masks: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError(f"{self.kind} oracles are not serialisable")


class AdditiveOracle(ValuationOracle):
    kind = "additive"

    def __init__(self, ground: Sequence[Any], values: Mapping[Any, float]):
        super().__init__(ground)
        unknown = set(values) - set(self.ground)
        if unknown:
            raise InputError(f"values for unknown resources {sorted(map(str, unknown))}")
        self.weights = np.array([float(values.get(r, 0.0)) for r in self.ground])
        if (self.weights < 0).any():
            raise InputError("additive values must be non-negative")

    def _values(self, masks):
        return masks @ self.weights

    def to_json(self):
        return {"type": "additive",
                "values": {r: w for r, w in zip(self.ground, self.weights.tolist()) if w}}


class TruncatedAdditiveOracle(AdditiveOracle):
    kind = "truncated-additive"

    def __init__(self, ground, values, cap: float):
        super().__init__(ground, values)
        if cap < 0:
            raise InputError("cap must be non-negative")
        self.cap = float(cap)

    def _values(self, masks):
        return np.minimum(self.cap, masks @ self.weights)

    def to_json(self):
        d = super().to_json()
        d.update(type="truncated-additive", cap=self.cap)
        return d


class CoverageOracle(ValuationOracle):
    """Weighted coverage: f(S) = total weight of universe items covered by S."""

    kind = "weighted-coverage"

    def __init__(self, ground, covers: Mapping[Any, Iterable[Any]], weights: Mapping[Any, float]):
        super().__init__(ground)
        self.items = tuple(weights)
        item_index = {u: j for j, u in enumerate(self.items)}
        self.item_weights = np.array([float(weights[u]) for u in self.items])
        if (self.item_weights < 0).any():
            raise InputError("universe weights must be non-negative")
        self.incidence = np.zeros((len(self.ground), len(self.items)), dtype=np.int64)
        for r, us in covers.items():
            if r not in self.index:
                raise InputError(f"unknown resource id {r!r}")
            for u in us:
                if u not in item_index:
                    raise InputError(f"unknown universe item {u!r}")
                self.incidence[self.index[r], item_index[u]] = 1

    def _values(self, masks):
        covered = (masks.astype(np.int64) @ self.incidence) > 0
        return covered @ self.item_weights

    def to_json(self):
        covers = {r: [self.items[j] for j in np.flatnonzero(row)]
                  for r, row in zip(self.ground, self.incidence) if row.any()}
        return {"type": "weighted-coverage", "covers": covers,
                "weights": dict(zip(self.items, self.item_weights.tolist()))}


class ExplicitTableOracle(ValuationOracle):
    """Full subset table; only for brute-force fixtures (ground <= 20)."""

    kind = "explicit-table"

    def __init__(self, ground, table: Mapping[frozenset, float], validate: bool = True):
        super().__init__(ground)
        n = len(self.ground)
        if n > MAX_EXHAUSTIVE_GROUND:
            raise CapabilityError(f"explicit tables support at most {MAX_EXHAUSTIVE_GROUND} resources")
        self.table = np.full(1 << n, np.nan)
        for s, v in table.items():
            self.table[_bits(self.mask(s))] = float(v)
        if np.isnan(self.table).any():
            raise InputError("explicit table must list every subset")
        if abs(self.table[0]) > TOL:
            raise InputError("explicit table must have f(empty) = 0")
        if validate:
            verdict = check_submodular(self)
            if not verdict.ok:
                raise InputError(f"explicit table is not monotone submodular: {verdict}")

    def _values(self, masks):
        return self.table[_bits_batch(masks)]

    def to_json(self):
        rows = []
        for code in range(len(self.table)):
            members = [r for j, r in enumerate(self.ground) if code >> j & 1]
            rows.append({"set": members, "value": float(self.table[code])})
        return {"type": "explicit-table", "ground": list(self.ground), "table": rows}


class ScaledOracle(ValuationOracle):
    """f(S) / eta; normalises a target value eta to 1."""

    def __init__(self, base: ValuationOracle, eta: float):
        super().__init__(base.ground)
        if eta <= 0:
            raise InputError("eta must be positive")
        self.base, self.eta = base, float(eta)
        self.kind = base.kind

    def _values(self, masks):
        return self.base._values(masks) / self.eta


class TruncatedOracle(ValuationOracle):
    """min(cap, f(S)) for an arbitrary base oracle."""

    def __init__(self, base: ValuationOracle, cap: float = 1.0):
        super().__init__(base.ground)
        self.base, self.cap = base, float(cap)
        self.kind = "truncated"

    def _values(self, masks):
        return np.minimum(self.cap, self.base._values(masks))


class RelabeledOracle(ValuationOracle):
    """Evaluate ``base`` through a map from new ground elements to base elements.

    Several new elements may map to the same base element (parallel edges
    carrying the same resource); the bundle is the union of their images.
    """

    def __init__(self, base: ValuationOracle, mapping: Mapping[Any, Any]):
        super().__init__(list(mapping))
        self.base = base
        self.kind = "relabeled"
        self._cols = np.array([base.index[mapping[e]] for e in self.ground], dtype=np.int64)

    def _values(self, masks):
        k = masks.shape[0]
        full = np.zeros((k, len(self.base.ground)), dtype=bool)
        for j, col in enumerate(self._cols):
            full[:, col] |= masks[:, j]
        return self.base._values(full)


class IndicatorOracle(ValuationOracle):
    """1 if the bundle meets ``good``, else 0 (basic players)."""

    kind = "indicator"

    def __init__(self, ground, good: Iterable[Any]):
        super().__init__(ground)
        self.good = frozenset(good)
        self._good_mask = self.mask(self.good)

    def _values(self, masks):
        return (masks & self._good_mask).any(axis=1).astype(float)


class ComplexPlayerOracle(ValuationOracle):
    """1 if the private resource is held, else f(S minus big resources)."""

    kind = "complex"

    def __init__(self, ground, base: ValuationOracle, private: Any, big: Iterable[Any]):
        super().__init__(ground)
        self.base, self.private, self.big = base, private, frozenset(big)
        self._private_col = self.index[private]
        keep = [r for r in base.ground if r not in self.big]
        self._src = np.array([self.index[r] for r in keep], dtype=np.int64)
        self._dst = np.array([base.index[r] for r in keep], dtype=np.int64)

    def _values(self, masks):
        sub = np.zeros((masks.shape[0], len(self.base.ground)), dtype=bool)
        sub[:, self._dst] = masks[:, self._src]
        out = self.base._values(sub)
        return np.where(masks[:, self._private_col], 1.0, out)


def _bits(mask: np.ndarray) -> int:
    return int(np.dot(mask.astype(np.int64), 1 << np.arange(len(mask), dtype=np.int64)))


def _bits_batch(masks: np.ndarray) -> np.ndarray:
    return masks.astype(np.int64) @ (1 << np.arange(masks.shape[1], dtype=np.int64))


def evaluate(oracle: ValuationOracle, bundle: Iterable[Any]) -> float:
    return oracle.evaluate(bundle)


def marginal(oracle: ValuationOracle, base: Iterable[Any], r: Any) -> float:
    return oracle.marginal(base, r)


@dataclass(frozen=True)
class SubmodularityVerdict:
    ok: bool
    kind: str = ""  # "submodular" or "monotone" when not ok
    A: frozenset = frozenset()
    B: frozenset = frozenset()
    r: Any = None


def all_subset_values(oracle: ValuationOracle) -> np.ndarray:
    """Values of every subset, indexed by bitmask in ground order."""
    n = len(oracle.ground)
    if n > MAX_EXHAUSTIVE_GROUND:
        raise CapabilityError(f"exhaustive enumeration limited to {MAX_EXHAUSTIVE_GROUND} resources")
    codes = np.arange(1 << n, dtype=np.int64)
    masks = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    return oracle.evaluate_batch(masks)


def check_submodular(oracle: ValuationOracle, tol: float = TOL) -> SubmodularityVerdict:
    """Exhaustive monotonicity + diminishing-returns check.

    Uses the local form f(A+r) - f(A) >= f(A+s+r) - f(A+s), which is
    equivalent to the global one, and reports the first violation with r
    in ground order, then s, then the smallest A.
    """
    n = len(oracle.ground)
    vals = all_subset_values(oracle)
    codes = np.arange(1 << n, dtype=np.int64)

    def members(code):
        return frozenset(oracle.ground[j] for j in range(n) if code >> j & 1)

    for j in range(n):
        bit = 1 << j
        A = codes[(codes & bit) == 0]
        gain = vals[A | bit] - vals[A]
        bad = np.flatnonzero(gain < -tol)
        if bad.size:
            a = int(A[bad[0]])
            return SubmodularityVerdict(False, "monotone", members(a), members(a), oracle.ground[j])
    for j in range(n):
        bj = 1 << j
        for k in range(n):
            if k == j:
                continue
            bk = 1 << k
            A = codes[(codes & (bj | bk)) == 0]
            lhs = vals[A | bj] - vals[A]
            rhs = vals[A | bj | bk] - vals[A | bk]
            bad = np.flatnonzero(lhs < rhs - tol)
            if bad.size:
                a = int(A[bad[0]])
                return SubmodularityVerdict(False, "submodular", members(a), members(a | bk),
                                            oracle.ground[j])
    return SubmodularityVerdict(True)


@dataclass
class Instance:
    players: list
    resources: list
    valuations: dict = field(repr=False)

    def __post_init__(self):
        self.players = [str(p) for p in self.players]
        self.resources = [str(r) for r in self.resources]
        if len(set(self.players)) != len(self.players):
            raise InputError("duplicate player ids")
        if len(set(self.resources)) != len(self.resources):
            raise InputError("duplicate resource ids")
        if set(self.valuations) != set(self.players):
            raise InputError("every player needs exactly one valuation oracle")
        for p, f in self.valuations.items():
            if set(f.ground) != set(self.resources):
                raise InputError(f"oracle of player {p!r} is not over the instance resources")

    def value(self, player: PlayerId, bundle: Iterable[ResourceId]) -> float:
        return self.valuations[player].evaluate(bundle)

    def bundles(self, assignment: Mapping[ResourceId, PlayerId | None]) -> dict:
        out = {p: set() for p in self.players}
        for r, p in assignment.items():
            if p is not None:
                out[p].add(r)
        return out

    def player_values(self, assignment: Mapping[ResourceId, PlayerId | None]) -> dict:
        return {p: self.value(p, b) for p, b in self.bundles(assignment).items()}

    def min_value(self, assignment) -> float:
        vals = self.player_values(assignment)
        return min(vals.values()) if vals else 0.0

    def empty_assignment(self) -> Assignment:
        return {r: None for r in self.resources}

    def scaled(self, eta: float) -> "Instance":
        return Instance(self.players, self.resources,
                        {p: ScaledOracle(f, eta) for p, f in self.valuations.items()})

    def total_queries(self) -> int:
        return sum(f.queries for f in self.valuations.values())


def check_assignment(instance: Instance, assignment: Mapping) -> None:
    if set(assignment) != set(instance.resources):
        raise InputError("assignment must have an entry for every resource")
    players = set(instance.players)
    for r, p in assignment.items():
        if p is not None and p not in players:
            raise InputError(f"resource {r!r} assigned to unknown player {p!r}")


FORMAT_VERSION = 1


def oracle_from_json(spec: Mapping, resources: Sequence[str], validate: bool = True) -> ValuationOracle:
    kind = spec.get("type")
    if kind == "additive":
        return AdditiveOracle(resources, spec.get("values", {}))
    if kind == "truncated-additive":
        return TruncatedAdditiveOracle(resources, spec.get("values", {}), spec["cap"])
    if kind == "weighted-coverage":
        return CoverageOracle(resources, spec.get("covers", {}), spec["weights"])
    if kind == "explicit-table":
        ground = spec.get("ground", list(resources))
        if set(ground) != set(resources):
            raise InputError("explicit-table ground must equal the instance resources")
        table = {frozenset(row["set"]): row["value"] for row in spec["table"]}
        return ExplicitTableOracle(ground, table, validate=validate)
    raise InputError(f"unknown valuation type {kind!r}")


def instance_from_json(data: Mapping, validate: bool = True) -> Instance:
    try:
        resources = [str(r) for r in data["resources"]]
        players, vals = [], {}
        for entry in data["players"]:
            pid = str(entry["id"])
            players.append(pid)
            vals[pid] = oracle_from_json(entry["valuation"], resources, validate=validate)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed instance: {exc}") from exc
    return Instance(players, resources, vals)


def instance_to_json(instance: Instance) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "resources": list(instance.resources),
        "players": [{"id": p, "valuation": instance.valuations[p].to_json()}
                    for p in instance.players],
    }


def load_instance(path, validate: bool = True) -> Instance:
    with open(path) as fh:
        return instance_from_json(json.load(fh), validate=validate)


def dump_instance(instance: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_json(instance), fh, indent=2, sort_keys=True)
        fh.write("\n")
