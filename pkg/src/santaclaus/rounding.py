"""Level-by-level randomized rounding of a DW witness into an augmentation solution."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .auggraph import AugInstance, AugSolution
from .clp import Witness, column_sources, empty_witness, merge_witness
from .config import log2c

LEVEL_ATTEMPTS = 32


class RoundingError(RuntimeError):
    def __init__(self, message: str, level: int, violation: str):
        super().__init__(message)
        self.level, self.violation = level, violation


def gamma_schedule(gamma0: float, n: int, h: int) -> list:
    r = 1 + 1 / log2c(n)
    return [gamma0 * r ** j for j in range(h)]


def _sink_rng(seed, level, sink, attempt) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), int(level), zlib.crc32(str(sink).encode()),
                                 int(attempt)])
    return np.random.default_rng(ss)


def sample_columns(witness: Witness, seed: int, attempt: int) -> dict:
    """One column per sink, drawn with the witness weights renormalised to 1."""
    out = {}
    for v in sorted(witness.sinks):
        cols = witness.columns_of(v)
        if not cols:
            raise RoundingError(f"sink {v} has no column", witness.level, "support")
        w = np.array([y for _, y in cols], dtype=float)
        p = w / w.sum()
        rng = _sink_rng(seed, witness.level, v, attempt)
        out[v] = cols[int(rng.choice(len(cols), p=p))][0]
    return out


@dataclass
class LevelRound:
    flow: dict
    next_witness: Witness | None
    next_sinks: tuple
    attempts: int
    congestion: int
    next_peak: float


def round_level(aug: AugInstance, witness: Witness, gamma: float, seed: int = 0,
                attempts: int = LEVEL_ATTEMPTS, n: int | None = None) -> LevelRound:
    """Sample a configuration per sink; resample the whole level on a Chernoff failure."""
    i = witness.level
    n = aug.n if n is None else n
    gbar_next = gamma * (1 + 1 / log2c(n))
    last = None
    for att in range(attempts):
        chosen = sample_columns(witness, seed, att)
        flow: dict = {}
        for col in chosen.values():
            for e, x in col.g.items():
                flow[e] = flow.get(e, 0) + x
        cong = max(flow.values(), default=0)
        subs = [c.sub for c in chosen.values() if c.sub is not None and c.sub.sinks]
        nxt = merge_witness(*subs) if subs else (empty_witness(i + 1) if i + 1 < aug.h else None)
        peak = max(nxt.usage().values(), default=0.0) if nxt is not None else 0.0
        if cong > 2 * gamma:
            last = f"congestion {cong} > 2*gamma={2 * gamma:g}"
            continue
        if peak > gbar_next + 1e-9:
            last = f"next-level budget {peak:g} > {gbar_next:g}"
            continue
        sinks = tuple(nxt.sinks) if nxt is not None else ()
        expected = set()
        for col in chosen.values():
            expected |= aug.linked_sinks(i, column_sources(aug.levels[i], col.g))
        assert set(sinks) == expected
        return LevelRound(flow, nxt, sinks, att + 1, cong, peak)
    raise RoundingError(f"level {i} rounding failed after {attempts} attempts: {last}", i, last)


@dataclass
class RoundingReport:
    solution: AugSolution
    gammas: list
    levels: list = field(default_factory=list)


def round_all_levels(aug: AugInstance, witness: Witness, gamma0: float, seed: int = 0,
                     attempts: int = LEVEL_ATTEMPTS) -> RoundingReport:
    gammas = gamma_schedule(gamma0, aug.n, aug.h)
    flows, reports = [], []
    wit = witness
    for i in range(aug.h):
        if wit is None or not wit.sinks:
            flows.append({})
            wit = empty_witness(i + 1) if i + 1 < aug.h else None
            continue
        lr = round_level(aug, wit, gammas[i], seed, attempts)
        flows.append(lr.flow)
        reports.append(lr)
        wit = lr.next_witness
    beta = max((max(g.values(), default=0) for g in flows), default=0)
    return RoundingReport(AugSolution(flows, beta=max(1, beta)), gammas, reports)
