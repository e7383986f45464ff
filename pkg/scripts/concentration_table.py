"""Tail-frequency tables for a single observable and for a compatible class.

    python scripts/concentration_table.py --trials 10000
"""
import argparse
from pathlib import Path

from qpac.experiments import ExperimentConfig, run_concentration, run_uniform_deviation, write_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--class-trials", type=int, default=300)
    ap.add_argument("--preset", default="shared-realizable")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    deltas = [0.05, 0.1]
    single = []
    for obs in ("plus", "deterministic"):
        cfg = ExperimentConfig(deltas=deltas, trials=args.trials, seed=args.seed, observable=obs)
        single += [{"observable": obs, **r} for r in run_concentration(cfg)]
    uniform = run_uniform_deviation(ExperimentConfig(preset=args.preset, deltas=deltas,
                                                     trials=args.class_trials, seed=args.seed))
    (out / "concentration_single.csv").write_text(write_rows(single))
    (out / "concentration_uniform.csv").write_text(write_rows(uniform))

    print(f"{'observable':<13} {'n':>5} {'delta':>6} {'t':>8} {'exceedance':>11}")
    for r in single:
        print(f"{r['observable']:<13} {r['n']:>5} {r['delta']:>6} {r['t']:>8.4f} {r['exceedance']:>11.4f}")
    print(f"\n{args.preset}: uniform deviation over the class")
    for r in uniform:
        print(f"n={r['n']:<5} delta={r['delta']:<5} radius={r['radius']:.4f} "
              f"max dev={r['max_deviation']:.4f} exceedance={r['exceedance']:.4f}")


if __name__ == "__main__":
    main()
