"""Solver configuration: theory constants or practical desk-scale defaults."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "practical"  # "practical" | "theory"
    alpha: float = 2.0
    beta: int = 2
    gamma: float = 8.0
    h: int = 2
    seed: int = 0
    # continuous greedy
    cg_delta: float = 0.02
    cg_samples: int = 2000
    # separation / pricing
    pricing: str = "auto"  # "greedy" | "exact" | "auto"
    exact_max_delta: int = 10
    exact_max_subsets: int = 400
    sep_attempts: int | None = None  # None: 64 * ceil(ln n)
    cheapest_rounds: int = 6
    # membership
    ellipsoid_cap: int = 30
    inner_radius: float = 1e-6
    cg_max_iter: int = 200
    # rounding
    round_attempts: int = 32
    # outer loops
    max_augmentations: int | None = None
    aug_solver: str = "lp"  # "lp" | "brute"
    top_up: bool = True  # hand free resources to starved complex players after each step
    search_steps: int = 40

    @classmethod
    def theory(cls, n: int, h: int = 2, **kw) -> "SolverConfig":
        """Constants from the analysis; only usable for tiny n."""
        lg = log2c(n)
        alpha = 40.0
        beta = math.ceil(10 * lg)
        gamma = math.ceil(1000 * alpha ** 3 * beta ** 3 * h ** 4 * lg ** 2)
        delta = 1.0 / (10 * n * n)
        samples = math.ceil(10 / delta ** 2 * (1 + math.log(max(n, 1))))
        base = dict(mode="theory", alpha=alpha, beta=beta, gamma=float(gamma), h=h,
                    cg_delta=delta, cg_samples=samples, pricing="greedy", top_up=False)
        base.update(kw)
        return cls(**base)

    def attempts_for(self, n: int) -> int:
        if self.sep_attempts is not None:
            return self.sep_attempts
        return 64 * max(1, math.ceil(math.log(max(n, 2))))

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SolverConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# largest epsilon with 2/e + 2 eps <= 0.75 in the separation rounding argument
THEORY_EPSILON = (0.75 - 2 / math.e) / 2


def log2c(n: float) -> float:
    """log base 2, clamped below by 1."""
    return max(1.0, math.log2(n)) if n > 1 else 1.0
