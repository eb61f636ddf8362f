"""Central-cut ellipsoid method driven by a separation callback.

The callback receives a query point ``x`` and returns either ``None`` (the
point is accepted) or a cut ``(a, c)`` such that every point of the target
set satisfies ``a @ y <= c`` while ``a @ x >= c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Cut = Optional[tuple]
Oracle = Callable[[np.ndarray], Cut]

RESYMMETRIZE_EVERY = 50
MEMBER_TOL = 1e-7


class ContractError(RuntimeError):
    """The separation callback returned a cut that does not separate the query."""


@dataclass
class EllipsoidResult:
    status: str  # "feasible" | "infeasible" | "budget"
    point: np.ndarray | None
    iterations: int
    budget: int
    transcript: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "point": None if self.point is None else self.point.tolist(),
            "iterations": self.iterations,
            "budget": self.budget,
            "transcript": self.transcript,
        }


def iteration_budget(dim: int, R: float, r: float) -> int:
    if not (R >= r > 0):
        raise ValueError("need R >= r > 0")
    return max(1, math.ceil(2 * (dim + 1) ** 2 * math.log(R / r)))


def volume_factor_bound(dim: int) -> float:
    return math.exp(-1.0 / (2 * (dim + 1)))


def solve_feasibility(dim: int, R: float, r: float, oracle: Oracle,
                      center=None, max_iter: int | None = None,
                      record: bool = False) -> EllipsoidResult:
    """Find a point accepted by ``oracle`` inside the ball of radius R.

    Returns status ``infeasible`` once the volume bound for an inner ball of
    radius ``r`` is used up, and ``budget`` if ``max_iter`` stops it earlier.
    """
    budget = iteration_budget(dim, R, r)
    cap = budget if max_iter is None else min(budget, max_iter)
    x = np.zeros(dim) if center is None else np.asarray(center, dtype=float).copy()
    P = np.eye(dim) * R * R
    transcript = []
    bound = volume_factor_bound(dim)
    for it in range(cap):
        cut = oracle(x.copy())
        if cut is None:
            return EllipsoidResult("feasible", x, it, budget, transcript)
        a, c = np.asarray(cut[0], dtype=float), float(cut[1])
        ax = float(a @ x)
        scale = max(1.0, abs(ax), abs(c))
        if ax < c - MEMBER_TOL * scale:
            raise ContractError(f"cut does not separate query: a.x={ax} < c={c}")
        if record:
            transcript.append({"center": x.tolist(), "a": a.tolist(), "c": c})
        Pa = P @ a
        aPa = float(a @ Pa)
        if aPa <= 0:
            # degenerate shape: nothing left to search
            return EllipsoidResult("infeasible", None, it + 1, budget, transcript)
        b = Pa / math.sqrt(aPa)
        n = dim
        if n == 1:
            x = x - b / 2
            P_new = P / 4
        else:
            x = x - b / (n + 1)
            P_new = (n * n / (n * n - 1.0)) * (P - (2.0 / (n + 1)) * np.outer(b, b))
        _, ld_old = np.linalg.slogdet(P)
        sign, ld_new = np.linalg.slogdet(P_new)
        ratio = math.exp((ld_new - ld_old) / 2) if sign > 0 else 0.0
        assert ratio <= bound * (1 + 1e-6), (ratio, bound)
        P = P_new
        if (it + 1) % RESYMMETRIZE_EVERY == 0:
            P = (P + P.T) / 2
    status = "infeasible" if cap == budget else "budget"
    return EllipsoidResult(status, None, cap, budget, transcript)


def optimize_with_binary_search(objective, dim: int, R: float, r: float, oracle: Oracle,
                                eps: float = 1e-3, center=None, lo: float | None = None,
                                hi: float | None = None,
                                max_iter: int | None = None) -> EllipsoidResult:
    """Approximately maximise ``objective @ x`` over the set behind ``oracle``."""
    w = np.asarray(objective, dtype=float)
    first = solve_feasibility(dim, R, r, oracle, center=center, max_iter=max_iter)
    norm = float(np.linalg.norm(w))
    if not first.feasible or norm == 0:
        return first
    c0 = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    best = first
    best_val = float(w @ first.point)
    lo = best_val if lo is None else max(lo, best_val)
    hi = float(w @ c0) + norm * R if hi is None else hi
    while hi - lo > eps:
        t = (lo + hi) / 2

        def cut_oracle(x, t=t):
            if float(w @ x) < t:
                return (-w, -t)
            return oracle(x)

        res = solve_feasibility(dim, R, r, cut_oracle, center=center, max_iter=max_iter)
        if res.feasible:
            val = float(w @ res.point)
            if val > best_val:
                best, best_val = res, val
            lo = max(t, val)
        else:
            hi = t
    return best
