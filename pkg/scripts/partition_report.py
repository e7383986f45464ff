"""Partition sizes, sample-size objectives and naive/QERM demand for every preset.

    python scripts/partition_report.py --epsilon 0.2 --delta 0.1
"""
import argparse
import json
from pathlib import Path

from qpac.cli import partition_summary
from qpac.experiments import demand_comparison
from qpac.presets import load_preset, preset_names


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilon", type=float, default=0.2)
    ap.add_argument("--delta", type=float, default=0.1)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    report = {}
    print(f"{'preset':<18} {'k':>3} {'greedy':>7} {'exact':>6} {'qerm n':>7} {'naive n':>8} {'ratio':>6}")
    for name in preset_names():
        _, cls, _ = load_preset(name)
        parts = partition_summary(cls, "best", args.epsilon, args.delta)
        demand = demand_comparison(cls, args.epsilon, args.delta)
        report[name] = {"partitions": parts, "demand": demand}
        p = parts["partitions"]
        print(f"{name:<18} {len(cls):>3} {p['greedy']['m']:>7} {p['exact']['m'] if 'exact' in p else '-':>6} "
              f"{demand['qerm_demand']:>7} {demand['naive_demand']:>8} {demand['ratio']:>6.2f}")
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "partition_report.json").write_text(json.dumps(report, indent=2) + "\n")


if __name__ == "__main__":
    main()
