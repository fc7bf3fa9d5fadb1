"""Regret table (and optional regret-vs-T curve) for a sweep config.

    python3 scripts/regret_sweep.py scripts/configs/sweep_small.json --out regret.csv
    python3 scripts/regret_sweep.py scripts/configs/sweep_small.json --curve 1e5 3e5 1e6 --out curve.csv
"""

from __future__ import annotations

import argparse
import sys

from reprobandit.cli import load_sweep_configs
from reprobandit.harness import SWEEP_COLUMNS, _fmt, regret_curve, rows_to_csv, sweep

CURVE_COLUMNS = ("policy", "env_id", "T", "rho", "runs", "mean_regret", "ci", "regret_over_T")


def curve_rows(configs, horizons) -> list[dict]:
    rows = []
    for c in configs:
        rc = regret_curve(c, horizons)
        for T, m, ci in zip(rc.horizons, rc.mean_pseudo_regret, rc.ci_halfwidth):
            rows.append({"policy": c.policy, "env_id": c.env_id, "T": T, "rho": _fmt(c.rho),
                         "runs": rc.runs_per_point, "mean_regret": _fmt(m), "ci": _fmt(ci),
                         "regret_over_T": _fmt(m / T)})
    return rows


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--curve", type=float, nargs="+", default=None,
                   help="horizons for a regret curve instead of the per-config table")
    args = p.parse_args(argv)
    configs = load_sweep_configs(args.config)
    if args.curve:
        text = rows_to_csv(curve_rows(configs, [int(t) for t in args.curve]), CURVE_COLUMNS)
    else:
        text = rows_to_csv(sweep(configs, args.workers), SWEEP_COLUMNS)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
