"""Agreement and accuracy of the grid-rounding mean estimator over a parameter grid.

    python3 scripts/sq_matrix.py --p 0.3 --trials 10000 --out sq.csv
"""

from __future__ import annotations

import argparse
import itertools
import sys

from reprobandit.harness import _fmt, check_repro_mean, rows_to_csv

COLUMNS = ("tau", "rho", "delta", "trials", "agreement_rate", "agreement_lower",
           "accuracy_rate", "certified")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--p", type=float, default=0.3, help="Bernoulli mean of the data")
    p.add_argument("--tau", type=float, nargs="+", default=[0.02, 0.05, 0.1])
    p.add_argument("--rho", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    p.add_argument("--delta", type=float, nargs="+", default=[0.01, 0.05])
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--out", default=None)
    args = p.parse_args(argv)
    rows = []
    for tau, rho, delta in itertools.product(args.tau, args.rho, args.delta):
        if delta >= rho:
            continue  # estimator rejects delta >= rho
        m = check_repro_mean(args.p, tau, rho, delta, args.trials)
        rows.append({"tau": _fmt(tau), "rho": _fmt(rho), "delta": _fmt(delta), "trials": m.trials,
                     "agreement_rate": _fmt(m.agreement_rate), "agreement_lower": _fmt(m.agreement_lower),
                     "accuracy_rate": _fmt(m.accuracy_rate), "certified": int(m.certified())})
    text = rows_to_csv(rows, COLUMNS)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if all(r["certified"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
