"""Command-line entry point: ``noregret {simulate,experiment,audit,oracle,probe}``.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 audit failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from . import experiments as exp
from .errors import ConfigError, NoRegretError, NumericalError
from .games import contract_losses
from .markov import stationary, tree_stationary
from .swap import BM_ETA_LIMIT

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_AUDIT = 0, 1, 2, 3
AUDIT_TOL = 1e-9

log = logging.getLogger("noregret")


def _load(args) -> exp.ExperimentConfig:
    if args.builtin:
        return exp.builtin_config(args.builtin)
    if not args.config:
        raise ConfigError("pass --config PATH or --builtin NAME")
    return exp.load_config(args.config)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    T = args.T or cfg.T_grid[0]
    variant = cfg.variants[0] if cfg.variants else None
    game_spec = {**cfg.game, **(variant or {}).get("game", {})}
    learner_specs = cfg.learners
    if variant and "learners" in variant:
        ls = variant["learners"]
        learner_specs = [ls] if isinstance(ls, dict) else ls
    game, _ = exp.build_game(game_spec, seed)
    trace = dyn.run(game, exp.build_learners(learner_specs, game, T), T, seed)
    raw = args.raw or cfg.raw
    report = dyn.regret_report(trace, raw=raw)
    out = Path(args.out or cfg.output.get("dir", "."))
    paths = dyn.export_trace(trace, out / f"{cfg.name}_trace")
    summary = {
        "name": cfg.name,
        "T": T,
        "seed": seed,
        "units": "raw" if raw else "unit",
        "external": report.external,
        "swap": report.swap,
        "best_action": report.best_action,
        "best_swap": [list(p) for p in report.best_swap],
        "trace": [str(p) for p in paths],
    }
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load(args)
    if args.raw:
        cfg.raw = True
    if args.seed is not None:
        cfg.seeds = [args.seed]
    out = args.out or cfg.output.get("dir") or "."
    summary = exp.run_experiment(cfg, out_dir=out, jobs=args.jobs)
    for label, metrics in summary["results"].items():
        for metric, entry in metrics.items():
            fit = entry.get("fit")
            slope = f"slope={fit['slope']:.4f} r2={fit['r_squared']:.4f}" if fit else "no fit"
            print(f"{label} {metric}: {slope}")
    return EXIT_OK


def audit_trace(trace: dyn.Trace) -> list[tuple[str, bool, str]]:
    """Invariant checks over a stored trace as ``(name, ok, detail)`` rows."""
    checks = []
    strat = trace.strategies
    ok = bool(np.all(strat >= -AUDIT_TOL) and np.all(np.abs(strat.sum(axis=2) - 1) <= 1e-9))
    checks.append(("strategies_on_simplex", ok, ""))
    ok = bool(np.all(trace.losses >= -AUDIT_TOL) and np.all(trace.losses <= 1 + AUDIT_TOL))
    checks.append(("losses_in_unit_interval", ok, ""))

    # the recorded loss vectors must be the expected losses of the recorded profile
    if trace.game is not None:
        worst = 0.0
        U = trace.game.unit_losses
        for t in range(trace.T):
            xs = list(strat[t])
            for i in range(trace.num_players):
                expect = contract_losses(U[i], i, xs)
                worst = max(worst, float(np.max(np.abs(expect - trace.losses[t, i]))))
        checks.append(("losses_match_profile", worst <= 1e-9, f"max dev {worst:.3e}"))

    for i, cfg in enumerate(trace.configs):
        ext = dyn.external_regret(trace, i)
        swp, _ = dyn.swap_regret(trace, i)
        checks.append((f"p{i}_swap_ge_external", swp >= ext - AUDIT_TOL, f"{swp:.6g} vs {ext:.6g}"))
        if cfg.kind == "optimistic":
            reg, a, b, c = dyn.rvu_terms(trace, i)
            slack = a + b - c - reg
            checks.append((f"p{i}_rvu", slack >= -AUDIT_TOL, f"slack {slack:.6g}"))
        if cfg.kind == "bm" and trace.learner_etas[i] <= BM_ETA_LIMIT and trace.T >= 2:
            drift = float(np.max(np.sum(np.abs(np.diff(strat[:, i], axis=0)), axis=1)))
            bound = 48 * trace.learner_etas[i]
            checks.append((f"p{i}_bm_drift", drift <= bound + AUDIT_TOL, f"{drift:.3e} <= {bound:.3e}"))

    if trace.game is not None and trace.game.name == "matching_pennies_G1" and trace.T:
        raw = trace.raw_realized()
        dev = float(np.max(np.abs(raw.sum(axis=1))))
        checks.append(("zero_sum_bookkeeping", dev <= AUDIT_TOL, f"max |Lx + Ly| {dev:.3e}"))
        Lx = np.cumsum(raw[:, 0])
        top = np.maximum(dyn.external_regret_curve(trace, 0, True), dyn.external_regret_curve(trace, 1, True))
        gap = float(np.min(top - np.abs(Lx)))
        checks.append(("max_regret_ge_abs_cumulative", gap >= -AUDIT_TOL, f"min gap {gap:.3e}"))
    return checks


def cmd_audit(args) -> int:
    if not args.trace:
        raise ConfigError("audit needs --trace PREFIX")
    trace = dyn.load_trace(args.trace)
    checks = audit_trace(trace)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_AUDIT


def cmd_oracle(args) -> int:
    """Cross-check the LU stationary solver and the swap decomposition by brute force."""
    rng = np.random.default_rng(args.seed or 0)
    trials = args.trials
    worst_markov = 0.0
    for n in (2, 3, 4, 5):
        for _ in range(trials):
            Q = rng.uniform(0.01, 1.0, (n, n))
            Q /= Q.sum(axis=1, keepdims=True)
            worst_markov = max(worst_markov, float(np.abs(stationary(Q) - tree_stationary(Q)).sum()))
    swap_mismatch = 0
    for n in (2, 3, 4):
        for _ in range(trials):
            T = int(rng.integers(1, 51))
            X = rng.dirichlet(np.ones(n), T)
            L = rng.uniform(0, 1, (T, n))
            fast, _ = dyn.swap_regret_from(X, L)
            slow, _ = dyn.swap_regret_bruteforce(X, L)
            swap_mismatch += fast != slow
    ok_m = worst_markov <= 1e-9
    print(f"{'PASS' if ok_m else 'FAIL'} markov_tree_vs_lu max l1 {worst_markov:.3e}")
    print(f"{'PASS' if swap_mismatch == 0 else 'FAIL'} swap_argmin_vs_bruteforce mismatches {swap_mismatch}")
    return EXIT_OK if ok_m and swap_mismatch == 0 else EXIT_AUDIT


def cmd_probe(args) -> int:
    report = exp.lower_bound_probe(args.T, args.eta, args.c0)
    d = asdict(report)
    d["sqrt_T"] = math.sqrt(args.T)
    print(json.dumps(d, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noregret", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--builtin", choices=sorted(exp.BUILTINS), help="use a built-in config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--raw", action="store_true", help="report regrets in native loss units")

    sp = sub.add_parser("simulate", help="one run from a config; writes the trace")
    common(sp)
    sp.add_argument("--T", type=int, help="rounds (default: first T in the grid)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("experiment", help="sweep (T, seed) cells and fit slopes")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("audit", help="invariant checks over a stored trace")
    sp.add_argument("--trace", help="trace prefix (without .csv/.json)")
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("oracle", help="markov and swap brute-force cross-checks")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=200)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("probe", help="lower-bound probe on the two-action constructions")
    sp.add_argument("--T", type=int, required=True)
    sp.add_argument("--eta", type=float, required=True)
    sp.add_argument("--c0", type=float, default=1.0)
    sp.set_defaults(func=cmd_probe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (NoRegretError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
