"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 infeasible
experiment.  Data goes to stdout (or ``--out``); logs go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .concept_class import (
    EXACT_LIMIT,
    ConceptClass,
    LossFunction,
    class_to_manifest,
    load_class_manifest,
    objective_of_partition,
    partition_compatible,
    singleton_partition,
    true_risk,
)
from .experiments import (
    QERM_COLUMNS,
    ExperimentConfig,
    run_compare,
    run_concentration,
    run_qerm_sweep,
    run_uniform_deviation,
    write_rows,
)
from .presets import load_preset, preset_names
from .quantum_core import Check, ValidationError, matrix_from_json, operator_checks, povm_checks
from .synthetic_env import classical_embed, environment_to_manifest

log = logging.getLogger("qpac")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError("parse", np.inf, 0.0, f"{path}: {exc}") from exc


# validate -----------------------------------------------------------------

def validation_report(doc: dict) -> list[tuple[str, Check]]:
    """(subject, check) pairs for a class manifest, environment manifest, POVM or operator."""
    out: list[tuple[str, Check]] = []
    if "predictors" in doc:
        labels = list(doc["labels"])
        for entry in doc["predictors"]:
            mats = [matrix_from_json(e) for e in entry["elements"]]
            subject = f"predictor {entry['id']}"
            out.append((subject, Check("outcome_count", abs(len(mats) - len(labels)), 0.0)))
            out += [(subject, c) for c in povm_checks(mats, projective=True)]
        loss = doc.get("loss", {"type": "zero_one"})
        if "table" in loss:
            t = np.asarray(loss["table"], dtype=float)
            bad = max(0.0, -t.min(), t.max() - 1.0) if t.shape == (len(labels),) * 2 else np.inf
            out.append(("loss", Check("loss_range", bad, 0.0)))
    elif "states" in doc:
        for i, s in enumerate(doc["states"]):
            out += [(f"state {i}", c) for c in operator_checks(matrix_from_json(s), density=True)]
        dist = np.asarray(doc["dist"], dtype=float)
        out.append(("dist", Check("distribution", abs(dist.sum() - 1.0) + max(0.0, -dist.min()), 1e-9)))
    elif "elements" in doc:
        mats = [matrix_from_json(e) for e in doc["elements"]]
        out += [("povm", c) for c in povm_checks(mats, projective=bool(doc.get("projective", True)))]
    elif "re" in doc:
        out += [("operator", c) for c in operator_checks(matrix_from_json(doc), density=bool(doc.get("density")))]
    else:
        raise ValidationError("parse", np.inf, 0.0, "unrecognised manifest")
    return out


def cmd_validate(args) -> int:
    report = validation_report(_read_json(args.manifest))
    ok = all(c.passed for _, c in report)
    if args.format == "json":
        _emit(json.dumps({"ok": ok, "checks": [{"subject": s, **c.as_dict()} for s, c in report]},
                         indent=2) + "\n", args.out)
    else:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {s:<16} {c.name:<14} residual={c.residual:.3e} "
                 f"threshold={c.threshold:.1e}" for s, c in report]
        failed = sorted({c.name for _, c in report if not c.passed})
        lines.append("all checks passed" if ok else f"failed: {', '.join(failed)}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_INVALID


# partition ----------------------------------------------------------------

def _load_class(args) -> tuple[ConceptClass, LossFunction]:
    if args.preset:
        _, cls, loss = load_preset(args.preset, args.preset_seed)
        return cls, loss
    if not args.manifest:
        raise UsageError("give a class manifest or --preset")
    return load_class_manifest(_read_json(args.manifest))


def partition_summary(cls: ConceptClass, strategy: str, epsilon: float, delta: float) -> dict:
    parts = {}
    if strategy in ("greedy", "best"):
        parts["greedy"] = partition_compatible(cls, "greedy")
    if strategy == "exact" or (strategy == "best" and len(cls) <= EXACT_LIMIT):
        parts["exact"] = partition_compatible(cls, "exact")
    parts["singleton"] = singleton_partition(cls)
    docs = {name: p.to_json(epsilon, delta) for name, p in parts.items()}
    winner = min(parts, key=lambda name: (objective_of_partition(parts[name], epsilon, delta),
                                          list(parts).index(name)))
    return {"epsilon": epsilon, "delta": delta, "partitions": docs, "winner": winner}


def cmd_partition(args) -> int:
    cls, _ = _load_class(args)
    doc = partition_summary(cls, args.strategy, args.epsilon, args.delta)
    log.info("winning strategy: %s (objective %d)", doc["winner"], doc["partitions"][doc["winner"]]["objective"])
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


# experiment commands --------------------------------------------------------

def _config(args) -> ExperimentConfig:
    doc = _read_json(args.config) if args.config else {}
    for key in ("seed", "trials", "strategy", "mode", "preset", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    try:
        return ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from exc


def _run_sweep(args, naive: bool) -> int:
    cfg = _config(args)
    rows, summary = run_qerm_sweep(cfg, naive=naive)
    _emit(write_rows(rows, args.format, QERM_COLUMNS), args.out)
    text = json.dumps({"config": asdict(cfg), "config_hash": cfg.hash(), "summary": summary}, indent=2)
    if args.summary:
        Path(args.summary).write_text(text + "\n")
    else:
        sys.stderr.write(text + "\n")
    if any(s["status"] == "infeasible" for s in summary):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_qerm(args) -> int:
    return _run_sweep(args, naive=False)


def cmd_naive(args) -> int:
    return _run_sweep(args, naive=True)


def cmd_concentration(args) -> int:
    cfg = _config(args)
    rows = run_concentration(cfg)
    if cfg.preset or cfg.class_manifest:
        rows += run_uniform_deviation(cfg)
    if args.format == "csv":
        groups = {}
        for r in rows:
            groups.setdefault(r["kind"], []).append(r)
        text = "\n".join(write_rows(g, "csv") for g in groups.values())
    else:
        text = write_rows(rows, "json")
    _emit(text, args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    _emit(write_rows(run_compare(cfg), args.format), args.out)
    return EXIT_OK


def embed_classical_doc(doc: dict) -> dict:
    """Embed a classical problem and report quantum and classical risk side by side."""
    features, labels = doc["features"], doc["labels"]
    dist = np.asarray(doc["dist"], dtype=float)
    funcs = doc["functions"]
    env, cls = classical_embed(features, labels, dist, funcs)
    loss = LossFunction.from_json(doc.get("loss", {"type": "zero_one"}), cls.labels)
    risks = []
    for p, f in zip(cls, funcs):
        classical = float(sum(dist[x, y] * loss.table[y, f[x]]
                              for x in range(len(features)) for y in range(len(labels))))
        risks.append({"id": p.id, "quantum_risk": true_risk(p, env, loss), "classical_risk": classical})
    return {"environment": environment_to_manifest(env), "class": class_to_manifest(cls, loss),
            "risks": risks}


def cmd_embed_classical(args) -> int:
    if not args.config:
        raise UsageError("embed-classical needs --config")
    _emit(json.dumps(embed_classical_doc(_read_json(args.config)), indent=2) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qpac", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt_default="csv"):
        sp.add_argument("--format", choices=["csv", "json"], default=fmt_default)
        sp.add_argument("--out", metavar="PATH")

    v = sub.add_parser("validate", help="check operator invariants of a manifest")
    v.add_argument("manifest")
    common(v, "csv")
    v.set_defaults(func=cmd_validate)

    pa = sub.add_parser("partition", help="compatibility partitions and their sample bounds")
    pa.add_argument("manifest", nargs="?")
    pa.add_argument("--preset", choices=preset_names())
    pa.add_argument("--preset-seed", type=int, default=0)
    pa.add_argument("--strategy", choices=["greedy", "exact", "best"], default="best")
    pa.add_argument("--epsilon", type=float, default=0.2)
    pa.add_argument("--delta", type=float, default=0.1)
    common(pa, "json")
    pa.set_defaults(func=cmd_partition)

    for name, func, helptext in (("qerm", cmd_qerm, "QERM trials over an (epsilon, delta) grid"),
                                 ("naive", cmd_naive, "one-batch-per-predictor baseline trials"),
                                 ("compare", cmd_compare, "naive vs QERM sample demand"),
                                 ("concentration", cmd_concentration, "tail-bound verification tables"),
                                 ("embed-classical", cmd_embed_classical, "orthogonal-state embedding of a classical problem")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--preset", choices=preset_names())
        sp.add_argument("--strategy", choices=["greedy", "exact", "singleton", "best"])
        sp.add_argument("--mode", choices=["complexity", "budget"])
        sp.add_argument("--workers", type=int)
        sp.add_argument("--summary", metavar="PATH")
        common(sp, "json" if name == "embed-classical" else "csv")
        sp.set_defaults(func=func)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qpac: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"qpac: validation failure: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"qpac: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
