"""Command-line entry point: ``simulate``, ``repro-test``, ``sweep`` and ``design``."""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from .environments import load_environment
from .harness import (
    SWEEP_COLUMNS,
    ExperimentConfig,
    check_repro_mean,
    clopper_pearson_lower,
    run_paired,
    run_policy,
    sweep,
    write_csv,
)
from .optimal_design import frank_wolfe_design, g_value, ky_initialize
from .shared_randomness import SharedSeed


def _eta(text: str | None):
    if text is None or text == "coarse":
        return text
    return float(text)


def write_trace(path: str | Path, trace) -> None:
    t = np.arange(1, trace.T + 1)
    with open(path, "w") as fh:
        fh.write("t,arm,reward\n")
        np.savetxt(fh, np.column_stack([t, trace.arms, trace.rewards]), fmt=["%d", "%d", "%.17g"], delimiter=",")


def _config(args, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        policy=args.policy, env=args.env, T=args.T, rho=args.rho,
        shared_seed=args.shared_seed, delta_min=args.delta_min, net_eta=_eta(args.net_eta),
        beta=args.beta, **extra,
    )


def cmd_simulate(args) -> int:
    cfg = _config(args)
    trace = run_policy(cfg, args.shared_seed, args.reward_seed)
    write_trace(args.out, trace)
    if args.batch_log:
        Path(args.batch_log).write_text(json.dumps(trace.batch_log, indent=1, default=_json_default))
    return 0


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def cmd_repro_test(args) -> int:
    if args.primitive == "mean":
        rows = []
        ok = True
        for tau, rho, delta in itertools.product(args.tau, args.rho_grid, args.delta):
            chk = check_repro_mean(args.p, tau, rho, delta, args.trials,
                                   args.shared_seed, args.reward_seed_a, args.reward_seed_b)
            ok &= chk.certified()
            rows.append({"tau": tau, "rho": rho, "delta": delta,
                         "agreement_rate": chk.agreement_rate, "accuracy_rate": chk.accuracy_rate})
        write_csv(args.out, rows, ("tau", "rho", "delta", "agreement_rate", "accuracy_rate"))
        return 0 if ok else 1
    if args.policy is None or args.env is None or args.T is None or args.rho is None:
        parser().error("policy repro-test needs --policy, --env, --T and --rho")
    cfg = _config(args, reward_seed_a=args.reward_seed_a, reward_seed_b=args.reward_seed_b, n_pairs=args.pairs)
    env = cfg.environment()
    rows = []
    for k in range(args.pairs):
        rep = run_paired(cfg, k, env)
        fd = "" if rep.first_divergence is None else rep.first_divergence
        rows.append({"pair_id": k, "identical": int(rep.identical), "first_divergence": fd})
    write_csv(args.out, rows, ("pair_id", "identical", "first_divergence"))
    hits = sum(r["identical"] for r in rows)
    lower = clopper_pearson_lower(hits, args.pairs)
    print(f"agreement {hits}/{args.pairs}, lower bound {lower:.4f}, target {1 - args.rho:.4f}")
    return 0 if lower >= 1.0 - args.rho else 1


def load_sweep_configs(path: str | Path) -> list[ExperimentConfig]:
    """JSON list of configs, or ``{"defaults": {...}, "configs": [...]}``.

    Relative environment paths resolve against the config file's directory.
    """
    path = Path(path)
    spec = json.loads(path.read_text())
    defaults, items = ({}, spec) if isinstance(spec, list) else (spec.get("defaults", {}), spec["configs"])
    out = []
    for item in items:
        merged = {**defaults, **item}
        if isinstance(merged.get("env"), str):
            merged["env"] = str(path.parent / merged["env"])
        out.append(ExperimentConfig.from_dict(merged))
    return out


def cmd_sweep(args) -> int:
    rows = sweep(load_sweep_configs(args.config), workers=args.workers)
    write_csv(args.out, rows, SWEEP_COLUMNS)
    return 1 if any(r["error"] for r in rows) else 0


def cmd_design(args) -> int:
    spec = json.loads(Path(args.arms).read_text())
    arms = np.asarray(spec["arms"] if isinstance(spec, dict) else spec, dtype=float)
    d = arms.shape[1]
    target = 2.0 * d if args.target_g in (None, "2d") else float(args.target_g)
    init = ky_initialize(arms, SharedSeed(args.shared_seed))
    design = frank_wolfe_design(arms, init, target, args.max_iters)
    out = {"support": design.support.tolist(), "weights": design.weights.tolist(),
           "indices": design.indices.tolist(), "g": g_value(design, arms), "converged": design.converged}
    Path(args.out).write_text(json.dumps(out, indent=1))
    return 0 if design.converged else 1


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reprobandit", description="Reproducible bandit simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def policy_args(sp, required: bool):
        sp.add_argument("--policy", choices=("etc", "alg1", "alg2", "alg3", "alg4"), required=required)
        sp.add_argument("--env", required=required, help="environment JSON file")
        sp.add_argument("--T", type=int, required=required)
        sp.add_argument("--rho", type=float, required=required)
        sp.add_argument("--shared-seed", type=int, default=0)
        sp.add_argument("--delta-min", type=float, help="known gap for etc")
        sp.add_argument("--net-eta", help="net resolution for alg4: a number or 'coarse'")
        sp.add_argument("--beta", type=int, help="override the blow-up factor")

    sp = sub.add_parser("simulate", help="run one execution and write its trace")
    policy_args(sp, True)
    sp.add_argument("--reward-seed", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.add_argument("--batch-log", help="write the per-batch JSON log here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("repro-test", help="paired executions or estimator certification")
    policy_args(sp, False)
    sp.add_argument("--reward-seed-a", type=int, default=1)
    sp.add_argument("--reward-seed-b", type=int, default=2)
    sp.add_argument("--pairs", type=int, default=30)
    sp.add_argument("--primitive", choices=("mean",), help="certify the rounding mean estimator instead")
    sp.add_argument("--p", type=float, default=0.3, help="Bernoulli mean for --primitive mean")
    sp.add_argument("--tau", type=float, nargs="+", default=[0.1])
    sp.add_argument("--rho-grid", type=float, nargs="+", default=[0.2])
    sp.add_argument("--delta", type=float, nargs="+", default=[0.01])
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_repro_test)

    sp = sub.add_parser("sweep", help="regret table over a list of configs")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("design", help="approximate G-optimal design over a finite arm list")
    sp.add_argument("--arms", required=True, help="JSON list of arm vectors")
    sp.add_argument("--target-g", default="2d")
    sp.add_argument("--shared-seed", type=int, default=0)
    sp.add_argument("--max-iters", type=int, default=10_000)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_design)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
