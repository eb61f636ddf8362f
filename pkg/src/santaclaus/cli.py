"""Command-line entry point.

Exit codes: 0 ok, 1 malformed input, 2 reject or counterexample found,
3 an iteration budget ran out.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import SolverConfig
from .instance import (FORMAT_VERSION, CapabilityError, InputError, check_submodular,
                       dump_instance, load_instance)

EXIT_OK, EXIT_INPUT, EXIT_REJECT, EXIT_BUDGET = 0, 1, 2, 3


class _Reporter:
    """JSON-lines report; every line is sorted so reruns are byte-identical."""

    def __init__(self, path):
        self.fh = open(path, "w") if path else sys.stdout
        self.close_fh = bool(path)

    def emit(self, obj: dict) -> None:
        self.fh.write(json.dumps(obj, sort_keys=True, default=_json_default) + "\n")
        self.fh.flush()

    def close(self):
        if self.close_fh:
            self.fh.close()


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    return str(x)


def _config(args, n: int) -> SolverConfig:
    """Config file keys, then flags; theory mode starts from the analysis constants."""
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
        SolverConfig.from_json(base)  # reject unknown keys early
    mode = args.mode or base.get("mode", "practical")
    over = {k: getattr(args, k) for k in ("alpha", "beta", "gamma", "h", "seed")
            if getattr(args, k, None) is not None}
    kw = {k: v for k, v in {**base, **over}.items() if k != "mode"}
    if mode == "theory":
        return SolverConfig.theory(n, **kw)
    return SolverConfig(**kw)


def _input_record(path) -> dict:
    raw = Path(path).read_bytes()
    return {"path": str(path), "sha256": hashlib.sha256(raw).hexdigest(),
            "instance": json.loads(raw)}


def _header(rep, command, args, cfg):
    rep.emit({"kind": "run", "format_version": FORMAT_VERSION, "command": command,
              "input": _input_record(args.instance), "config_file": args.config,
              "config": cfg.to_json(), "seed": cfg.seed})


# ---------------------------------------------------------------- solve

def cmd_solve(args) -> int:
    from .augment import solve_allocation
    inst = load_instance(args.instance)
    cfg = _config(args, len(inst.players) + len(inst.resources))
    rep = _Reporter(args.report)
    try:
        _header(rep, "solve", args, cfg)
        res = solve_allocation(inst, cfg, progress=(lambda r: rep.emit({"kind": "progress", **r}))
                               if args.progress else None)
        for t in res.trace:
            rep.emit({"kind": "eta", **t})
        vals = inst.player_values(res.assignment)
        alloc = {"format_version": FORMAT_VERSION, "assignments": res.assignment,
                 "min_value": min(vals.values()), "eta_star": res.eta_star}
        if args.out:
            with open(args.out, "w") as fh:
                json.dump(alloc, fh, indent=2, sort_keys=True)
                fh.write("\n")
        rep.emit({"kind": "result", "status": res.status, "eta_star": res.eta_star,
                  "min_value": alloc["min_value"], "player_values": vals,
                  "guarantee": res.eta_star / cfg.gamma, "queries": inst.total_queries(),
                  "allocation": alloc})
    finally:
        rep.close()
    print(f"status={res.status} eta*={res.eta_star:.6g} min_value={alloc['min_value']:.6g} "
          f"(guaranteed >= eta*/gamma = {res.eta_star / cfg.gamma:.6g})", file=sys.stderr)
    return {"success": EXIT_OK, "trivial": EXIT_OK, "reject": EXIT_REJECT,
            "budget": EXIT_BUDGET}[res.status]


# ---------------------------------------------------------------- generators and oracles

def cmd_gen(args) -> int:
    from .generators import generate
    g = generate(args.family, args.players, args.resources, args.seed)
    out = Path(args.out)
    dump_instance(g.instance, out)
    side = out.with_name(out.stem + ".opt.json")
    with open(side, "w") as fh:
        json.dump(g.sidecar(args.family, args.players, args.resources, args.seed), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out} and {side}", file=sys.stderr)
    return EXIT_OK


def cmd_brute(args) -> int:
    from .oracle import brute_opt
    inst = load_instance(args.instance)
    opt, assignment = brute_opt(inst)
    print(json.dumps({"kind": "brute", "opt": opt, "assignments": assignment}, sort_keys=True))
    return EXIT_OK


def cmd_check_submodular(args) -> int:
    inst = load_instance(args.instance, validate=False)
    bad = False
    for p in inst.players:
        v = check_submodular(inst.valuations[p])
        rec = {"kind": "check-submodular", "player": p, "ok": v.ok}
        if not v.ok:
            bad = True
            rec.update(violation=v.kind, A=sorted(v.A), B=sorted(v.B), r=v.r)
        print(json.dumps(rec, sort_keys=True, default=_json_default))
    return EXIT_REJECT if bad else EXIT_OK


def cmd_cgreedy(args) -> int:
    from .instance import all_subset_values
    from .sep import budget_box_maximizer, continuous_greedy, multilinear_estimate, multilinear_exact
    inst = load_instance(args.instance)
    cfg = _config(args, len(inst.resources))
    p = args.player or inst.players[0]
    if p not in inst.valuations:
        raise InputError(f"unknown player {p!r}")
    f = inst.valuations[p]
    rng = np.random.default_rng(cfg.seed)
    res = continuous_greedy(f, budget_box_maximizer(args.budget), cfg.cg_delta, cfg.cg_samples, rng)
    n = len(f.ground)
    if n <= 16:
        fy = multilinear_exact(f, res.y)
        vals = all_subset_values(f)
        sizes = np.array([bin(c).count("1") for c in range(1 << n)])
        opt = float(vals[sizes <= math.floor(args.budget)].max())
    else:
        fy = multilinear_estimate(f, res.y, cfg.cg_samples, rng)
        opt = None
    print(json.dumps({"kind": "cgreedy", "player": p, "budget": args.budget,
                      "y": [round(float(x), 12) for x in res.y], "F_y": fy, "optimum": opt,
                      "ratio": (fy / opt) if opt else None}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- canonical-instance components

def _canonical_setup(args):
    from .augment import initial_assignment
    from .auggraph import build_aug_instance
    from .reduction import canonicalize
    inst = load_instance(args.instance)
    canon_n = 3 * len(inst.players) + len(inst.resources)
    cfg = _config(args, canon_n)
    canon = canonicalize(inst, cfg.gamma)
    if args.assignment:
        with open(args.assignment) as fh:
            sigma = {r: None for r in canon.resources}
            sigma.update(json.load(fh)["assignments"])
        players = set(canon.players)
        for r, q in sigma.items():
            if r not in canon.instance.resources or (q is not None and q not in players):
                raise InputError(f"assignment entry {r!r} -> {q!r} is not canonical")
    else:
        sigma = initial_assignment(canon)
    aug = build_aug_instance(canon, sigma, cfg.h)
    return inst, cfg, canon, sigma, aug


def _membership(cfg, aug):
    from .clp import membership, uniform_budget
    return membership(aug, 0, [aug.target], uniform_budget(aug, 0, 1.0), cfg)


def cmd_clp_membership(args) -> int:
    _, cfg, _, _, aug = _canonical_setup(args)
    if aug.nothing_to_augment:
        print(json.dumps({"kind": "clp-membership", "status": "member", "trivial": True}))
        return EXIT_OK
    res = _membership(cfg, aug)
    rec = {"kind": "clp-membership", "status": res.status, "stats": res.stats}
    if res.status == "member":
        rec["witness"] = res.witness.to_json()
    elif res.status == "hyperplane":
        rec["w"] = {f"{k[0]}:{k[1]}": x for k, x in res.w.items() if x}
        rec["W"] = res.W
    print(json.dumps(rec, sort_keys=True, default=_json_default))
    return {"member": EXIT_OK, "hyperplane": EXIT_REJECT, "budget": EXIT_BUDGET}[res.status]


def cmd_round(args) -> int:
    from .auggraph import check_feasible
    from .rounding import RoundingError, round_all_levels
    _, cfg, _, _, aug = _canonical_setup(args)
    if aug.nothing_to_augment:
        print(json.dumps({"kind": "round", "status": "trivial"}))
        return EXIT_OK
    res = _membership(cfg, aug)
    if res.status != "member":
        print(json.dumps({"kind": "round", "status": res.status}))
        return EXIT_REJECT if res.status == "hyperplane" else EXIT_BUDGET
    try:
        rep = round_all_levels(aug, res.witness, float(cfg.beta), cfg.seed, cfg.round_attempts)
    except RoundingError as exc:
        print(json.dumps({"kind": "round", "status": "budget", "message": str(exc)}))
        return EXIT_BUDGET
    sol = rep.solution
    verdict = check_feasible(aug, sol, {aug.target}, cfg.alpha, sol.beta)
    print(json.dumps({"kind": "round", "status": "ok", "congestion": sol.beta,
                      "gammas": rep.gammas, "attempts": [lr.attempts for lr in rep.levels],
                      "feasible": verdict.ok,
                      "flows": [{str(e): x for e, x in sorted(g.items())} for g in sol.flows]},
                     sort_keys=True))
    return EXIT_OK


def cmd_augment_once(args) -> int:
    from .augment import AugSolverBudget, augment_once, brute_aug_solver, lp_aug_solver
    _, cfg, canon, sigma, aug = _canonical_setup(args)
    solver = brute_aug_solver if cfg.aug_solver == "brute" else lp_aug_solver(cfg)
    if aug.nothing_to_augment:
        print(json.dumps({"kind": "augment-once", "status": "nothing-to-do",
                          "assignments": sigma}, sort_keys=True))
        return EXIT_OK
    try:
        sol = solver(aug)
    except AugSolverBudget as exc:
        print(json.dumps({"kind": "augment-once", "status": "budget", "message": str(exc)}))
        return EXIT_BUDGET
    if sol is None:
        print(json.dumps({"kind": "augment-once", "status": "reject"}))
        return EXIT_REJECT
    beta = max(1, sol.beta, max((max(g.values(), default=0) for g in sol.flows), default=0))
    res = augment_once(canon, sigma, aug, sol, cfg.alpha, beta, cfg.gamma, args.k)
    print(json.dumps({"kind": "augment-once", "status": "ok", "case": res.case,
                      "uncovered_before": res.before, "uncovered_after": res.after,
                      "complex_floor": res.floor, "assignments": res.sigma}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="santaclaus",
                                 description="Max-min allocation with submodular valuations.")
    sub = ap.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--config", help="JSON config file; flags below override it")
        p.add_argument("--mode", choices=["practical", "theory"])
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=int)
        p.add_argument("--gamma", type=float)
        p.add_argument("--h", type=int)
        p.add_argument("--seed", type=int)

    p = sub.add_parser("solve", help="run the full pipeline")
    p.add_argument("instance")
    p.add_argument("--out", help="allocation JSON path")
    p.add_argument("--report", help="JSON-lines report path (default stdout)")
    p.add_argument("--progress", action="store_true", help="stream per-iteration records")
    solver_flags(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("gen", help="generate an instance")
    p.add_argument("family")
    p.add_argument("--players", type=int, required=True)
    p.add_argument("--resources", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("brute", help="exact optimum by enumeration")
    p.add_argument("instance")
    p.set_defaults(fn=cmd_brute)

    p = sub.add_parser("check-submodular", help="exhaustive monotonicity/submodularity check")
    p.add_argument("instance")
    p.set_defaults(fn=cmd_check_submodular)

    p = sub.add_parser("cgreedy", help="continuous greedy under a cardinality budget")
    p.add_argument("instance")
    p.add_argument("--player")
    p.add_argument("--budget", type=float, default=1.0)
    solver_flags(p)
    p.set_defaults(fn=cmd_cgreedy)

    for name, fn, helptext in (
            ("clp-membership", cmd_clp_membership, "membership of the all-ones budget"),
            ("round", cmd_round, "membership followed by level rounding"),
            ("augment-once", cmd_augment_once, "one augmentation step")):
        p = sub.add_parser(name, help=f"{helptext} on the canonical instance (target value 1)")
        p.add_argument("instance")
        p.add_argument("--assignment", help="canonical assignment JSON; default gives complex "
                                            "players their private resources")
        if name == "augment-once":
            p.add_argument("--k", type=int, default=1, help="iteration index")
        solver_flags(p)
        p.set_defaults(fn=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, CapabilityError, json.JSONDecodeError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
