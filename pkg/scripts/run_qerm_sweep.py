"""Excess-risk sweep: QERM vs the one-batch-per-predictor baseline.

Writes per-trial rows and a summary table to results/.  The budget grid
runs both learners on the same number of samples; the complexity run uses
each learner's own sample-size rule.

    python scripts/run_qerm_sweep.py --preset blocks3 --trials 200
"""
import argparse
import json
import logging
from pathlib import Path

from qpac.experiments import QERM_COLUMNS, ExperimentConfig, run_qerm_sweep, write_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="blocks3")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--n-grid", type=int, nargs="+", default=[6, 9, 12, 18, 24, 36, 48, 96])
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    base = dict(preset=args.preset, trials=args.trials, seed=args.seed, workers=args.workers,
                strategy="best")
    table = []
    for mode, extra in (("budget", {"mode": "budget", "n_grid": args.n_grid}), ("complexity", {})):
        cfg = ExperimentConfig(**base, **extra)
        for learner, naive in (("qerm", False), ("naive", True)):
            rows, summary = run_qerm_sweep(cfg, naive=naive)
            stem = f"{args.preset}_{learner}_{mode}"
            (out / f"{stem}.csv").write_text(write_rows(rows, "csv", QERM_COLUMNS))
            for s in summary:
                table.append({"learner": learner, "mode": mode, **s})
    (out / f"{args.preset}_sweep_summary.json").write_text(json.dumps(table, indent=2) + "\n")

    print(f"{'learner':<7} {'mode':<10} {'n':>6} {'m':>3} {'fail':>6} {'mean excess':>12}")
    for s in table:
        if s["status"] != "ok":
            print(f"{s['learner']:<7} {s['mode']:<10} {s['n']!s:>6}   infeasible")
            continue
        print(f"{s['learner']:<7} {s['mode']:<10} {s['n_total']:>6} {s['m']:>3} "
              f"{s['failure_rate']:>6.3f} {s['mean_excess']:>12.4f}")


if __name__ == "__main__":
    main()
