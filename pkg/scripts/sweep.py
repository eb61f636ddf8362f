"""Solve generated instances across families and gamma; compare with brute force.

    python scripts/sweep.py --players 3 --resources 6 --seeds 5 --out sweep.jsonl

Prints one summary row per (family, gamma) and writes every run as JSON lines.
"""

from __future__ import annotations

import argparse
import json
import time
from dataclasses import asdict, dataclass

from santaclaus.augment import solve_allocation
from santaclaus.config import SolverConfig
from santaclaus.generators import FAMILIES, generate
from santaclaus.oracle import brute_opt


@dataclass
class SweepConfig:
    families: tuple = FAMILIES
    gammas: tuple = (2.0, 4.0, 8.0)
    players: int = 3
    resources: int = 6
    seeds: int = 5
    brute: bool = True


def run(cfg: SweepConfig, out=None):
    rows = []
    for fam in cfg.families:
        for gamma in cfg.gammas:
            agg = {"runs": 0, "success": 0, "ratio_sum": 0.0, "iters": 0, "seconds": 0.0}
            for seed in range(cfg.seeds):
                try:
                    gen = generate(fam, cfg.players, cfg.resources, seed)
                except Exception as exc:  # family constraints on the sizes
                    print(f"skip {fam}: {exc}")
                    break
                inst = gen.instance
                t0 = time.perf_counter()
                res = solve_allocation(inst, SolverConfig(gamma=gamma, seed=seed))
                dt = time.perf_counter() - t0
                value = inst.min_value(res.assignment)
                opt = brute_opt(inst)[0] if cfg.brute else gen.opt
                rec = {"family": fam, "gamma": gamma, "seed": seed, "status": res.status,
                       "eta_star": res.eta_star, "min_value": value, "opt": opt,
                       "ratio": (value / opt) if opt else None, "seconds": round(dt, 3),
                       "gap_iterations": sum(t["iterations"] for t in res.trace)}
                if out:
                    out.write(json.dumps(rec, sort_keys=True) + "\n")
                agg["runs"] += 1
                agg["success"] += res.status == "success"
                agg["ratio_sum"] += rec["ratio"] or 0.0
                agg["iters"] += rec["gap_iterations"]
                agg["seconds"] += dt
            if agg["runs"]:
                rows.append((fam, gamma, agg))
                print(f"{fam:30s} gamma={gamma:<4g} runs={agg['runs']} success={agg['success']} "
                      f"mean value/OPT={agg['ratio_sum'] / agg['runs']:.3f} "
                      f"gap iterations={agg['iters']} time={agg['seconds']:.1f}s")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--players", type=int, default=3)
    ap.add_argument("--resources", type=int, default=6)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--gammas", type=float, nargs="+", default=[2.0, 4.0, 8.0])
    ap.add_argument("--families", nargs="+", default=list(FAMILIES))
    ap.add_argument("--no-brute", action="store_true", help="skip the exact optimum")
    ap.add_argument("--out", help="JSON-lines output path")
    a = ap.parse_args()
    cfg = SweepConfig(tuple(a.families), tuple(a.gammas), a.players, a.resources, a.seeds,
                      not a.no_brute)
    print(json.dumps(asdict(cfg)))
    out = open(a.out, "w") if a.out else None
    try:
        run(cfg, out)
    finally:
        if out:
            out.close()


if __name__ == "__main__":
    main()
