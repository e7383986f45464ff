"""Experiment configs and sweep runners behind the CLI.

Every runner returns plain row dicts; ``write_rows`` renders them as CSV or
JSON.  Rows are deterministic functions of the config: per-trial generators
are seeded with ``seed + trial`` and rows are sorted by grid point, then
trial, whatever order the worker pool finishes in.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .concept_class import (
    ConceptClass,
    LossFunction,
    best_partition,
    load_class_manifest,
    objective_of_partition,
    partition_compatible,
    compatible_class_bound,
    singleton_partition,
    true_risk,
)
from .presets import load_preset, preset_names
from .qerm_engine import (
    InsufficientSamplesError,
    check_concentration,
    deviation_bound,
    uniform_radius,
    plan_batches,
    run_qerm,
)
from .quantum_core import DensityOperator, basis_measurement, projector
from .synthetic_env import Environment, load_environment_manifest

log = logging.getLogger(__name__)

QERM_COLUMNS = ["trial", "epsilon", "delta", "m", "n_total", "selected_id", "emp_loss",
                "true_risk", "opt", "excess", "failed", "strategy", "mode", "config_hash", "seed"]


@dataclass
class ExperimentConfig:
    preset: str | None = None
    preset_seed: int = 0
    class_manifest: str | None = None
    environment_manifest: str | None = None
    epsilons: list = field(default_factory=lambda: [0.2])
    deltas: list = field(default_factory=lambda: [0.1])
    trials: int = 200
    seed: int = 0
    strategy: str = "greedy"
    mode: str = "complexity"
    n_grid: list = field(default_factory=list)
    workers: int = 1
    observable: str = "plus"

    def __post_init__(self):
        if not self.epsilons or not self.deltas:
            raise ValueError("epsilon and delta grids must be nonempty")
        for v in (*self.epsilons, *self.deltas):
            if not 0.0 < float(v) < 1.0:
                raise ValueError(f"epsilon/delta value {v} outside (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.mode not in ("complexity", "budget"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "budget" and not self.n_grid:
            raise ValueError("budget mode needs a nonempty n_grid")
        if self.preset is not None and self.preset not in preset_names():
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.strategy not in ("greedy", "exact", "singleton", "best"):
            raise ValueError(f"unknown strategy {self.strategy!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def hash(self) -> str:
        doc = asdict(self)
        doc.pop("workers")  # does not affect results
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def load_problem(cfg: ExperimentConfig) -> tuple[Environment | None, ConceptClass, LossFunction]:
    return _load_problem(cfg.preset, cfg.preset_seed, cfg.class_manifest, cfg.environment_manifest)


@lru_cache(maxsize=8)
def _load_problem(preset, preset_seed, class_manifest, environment_manifest):
    if preset is not None:
        return load_preset(preset, preset_seed)
    if class_manifest is None:
        raise ValueError("config needs either a preset or a class_manifest")
    cls, loss = load_class_manifest(class_manifest)
    env = load_environment_manifest(environment_manifest) if environment_manifest else None
    return env, cls, loss


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _grid(cfg: ExperimentConfig) -> list[tuple[float, float, int | None]]:
    ns = cfg.n_grid if cfg.mode == "budget" else [None]
    return [(float(e), float(d), n) for e in cfg.epsilons for d in cfg.deltas for n in ns]


def _qerm_trial(args) -> dict:
    cfg, eps, delta, n, trial, naive = args
    env, cls, loss = load_problem(cfg)
    if env is None:
        raise ValueError("qerm trials need an environment")
    strategy = "singleton" if naive else cfg.strategy
    rng = np.random.default_rng(cfg.seed + trial)
    report = run_qerm(cls, loss, env=env, rng=rng, epsilon=eps, delta=delta, strategy=strategy,
                      mode=cfg.mode, total_n=n)
    return {
        "trial": trial, "epsilon": eps, "delta": delta, "m": report.m, "n_total": report.n_total,
        "selected_id": report.selected_id, "emp_loss": report.selected_loss,
        "true_risk": report.true_risk_selected, "opt": report.opt, "excess": report.excess,
        "failed": report.failed(), "strategy": report.partition.strategy, "mode": cfg.mode,
        "config_hash": cfg.hash(), "seed": cfg.seed,
    }


def run_qerm_sweep(cfg: ExperimentConfig, *, naive: bool = False) -> tuple[list[dict], list[dict]]:
    """Per-trial rows and per-grid-point summaries.

    A grid point whose budget cannot cover the partition is reported in the
    summary with ``status='infeasible'`` and produces no rows.
    """
    rows: list[dict] = []
    summaries: list[dict] = []
    _, cls, _ = load_problem(cfg)
    for eps, delta, n in _grid(cfg):
        if cfg.mode == "budget":
            part = (singleton_partition(cls) if naive else
                    best_partition(cls, eps, delta) if cfg.strategy == "best" else
                    partition_compatible(cls, cfg.strategy))
            try:
                plan_batches(part, eps, delta, "budget", n)
            except InsufficientSamplesError as exc:
                log.warning("grid point eps=%s delta=%s n=%s infeasible: %s", eps, delta, n, exc)
                summaries.append({"epsilon": eps, "delta": delta, "n": n, "status": "infeasible"})
                continue
        jobs = [(cfg, eps, delta, n, t, naive) for t in range(cfg.trials)]
        log.info("running %d trials at eps=%s delta=%s n=%s", cfg.trials, eps, delta, n)
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                point_rows = list(pool.map(_qerm_trial, jobs, chunksize=max(1, cfg.trials // (4 * cfg.workers))))
        else:
            point_rows = [_qerm_trial(j) for j in jobs]
        point_rows.sort(key=lambda r: r["trial"])
        rows.extend(point_rows)
        summaries.append(summarize(point_rows, eps, delta, n))
    return rows, summaries


def binomial_margin(p: float, trials: int) -> float:
    return 3.0 * math.sqrt(p * (1.0 - p) / trials)


def summarize(rows: Sequence[dict], eps: float, delta: float, n: int | None = None) -> dict:
    failures = sum(bool(r["failed"]) for r in rows)
    rate = failures / len(rows)
    excess = np.array([r["excess"] for r in rows], dtype=float)
    margin = binomial_margin(delta, len(rows))
    return {
        "epsilon": eps, "delta": delta, "n": n, "status": "ok",
        "n_total": rows[0]["n_total"], "m": rows[0]["m"], "strategy": rows[0]["strategy"],
        "trials": len(rows), "failures": failures, "failure_rate": rate,
        "margin": margin, "within_bound": rate <= delta + margin,
        "mean_excess": float(excess.mean()), "median_excess": float(np.median(excess)),
    }


def concentration_observable(name: str) -> tuple:
    """``(0/1-valued qubit observable, source state)`` for the single-observable tail table."""
    povm = basis_measurement(2, outcomes=(0.0, 1.0))
    if name == "plus":
        rho = DensityOperator(projector(np.array([1.0, 1.0]) / math.sqrt(2.0)))
    elif name == "deterministic":
        rho = DensityOperator(projector(np.array([1.0, 0.0])))
    else:
        raise ValueError(f"unknown observable {name!r}")
    return povm, rho


def run_concentration(cfg: ExperimentConfig, n_grid: Sequence[int] = (100, 500, 2000)) -> list[dict]:
    """Empirical tail frequency at the deviation where the tail bound equals delta."""
    povm, rho = concentration_observable(cfg.observable)
    rows = []
    for n in (cfg.n_grid or n_grid):
        for delta in cfg.deltas:
            t = deviation_bound(int(n), 1.0, float(delta))
            rng = np.random.default_rng([cfg.seed, int(n), int(round(float(delta) * 1e6))])
            rate = check_concentration(povm, rho, int(n), cfg.trials, rng, t)
            margin = binomial_margin(float(delta), cfg.trials)
            rows.append({"kind": "single", "n": int(n), "delta": float(delta), "t": t,
                         "trials": cfg.trials, "exceedance": rate, "bound": float(delta),
                         "margin": margin, "ok": rate <= float(delta) + margin,
                         "config_hash": cfg.hash(), "seed": cfg.seed})
    return rows


def run_uniform_deviation(cfg: ExperimentConfig, n_grid: Sequence[int] = (200, 800)) -> list[dict]:
    """Max over the class of |empirical - true| loss against the per-subclass uniform radius.

    Budget ``n`` is split over the partition; a trial exceeds when any
    subclass ``r`` deviates by more than ``radius(n_r, |C_r|, delta/m)``.
    """
    env, cls, loss = load_problem(cfg)
    risks = {p.id: true_risk(p, env, loss) for p in cls}
    rows = []
    for n in (cfg.n_grid or n_grid):
        for delta in cfg.deltas:
            part = partition_compatible(cls, cfg.strategy if cfg.strategy != "best" else "greedy")
            eps = float(cfg.epsilons[0])
            plan = plan_batches(part, eps, float(delta), "budget", int(n))
            radii = [uniform_radius(nr, len(sub), float(delta) / part.m)
                     for nr, sub in zip(plan.batch_sizes, part.subclasses)]
            exceed = 0
            worst = 0.0
            for trial in range(cfg.trials):
                rng = np.random.default_rng(cfg.seed + trial)
                rep = run_qerm(cls, loss, env=env, rng=rng, epsilon=eps, delta=float(delta),
                               partition=part, mode="budget", total_n=int(n))
                devs = [max(abs(rep.empirical_losses[i] - risks[i]) for i in sub) for sub in part.subclasses]
                worst = max(worst, max(devs))
                exceed += any(dv > rad for dv, rad in zip(devs, radii))
            rows.append({"kind": "uniform", "n": int(n), "delta": float(delta), "m": part.m,
                         "radius": max(radii), "trials": cfg.trials, "exceedance": exceed / cfg.trials,
                         "max_deviation": worst, "ok": exceed / cfg.trials <= float(delta)
                         + binomial_margin(float(delta), cfg.trials),
                         "config_hash": cfg.hash(), "seed": cfg.seed})
    return rows


def demand_comparison(cls: ConceptClass, epsilon: float, delta: float) -> dict:
    """Sample demand of QERM (best partition) against one-batch-per-predictor."""
    qerm_part = best_partition(cls, epsilon, delta)
    qerm_n = objective_of_partition(qerm_part, epsilon, delta)
    naive_n = objective_of_partition(singleton_partition(cls), epsilon, delta)
    k = len(cls)
    return {
        "class_size": k, "epsilon": epsilon, "delta": delta,
        "m": qerm_part.m, "strategy": qerm_part.strategy,
        "qerm_demand": qerm_n, "naive_demand": naive_n, "ratio": naive_n / qerm_n,
        # even split, uniform radius sqrt(2|C|/n ln(2/delta)) <= eps/2
        "naive_radius_demand": math.ceil(8.0 * k / epsilon**2 * math.log(2.0 / delta)),
        "compatible_class_bound": compatible_class_bound(k, epsilon, delta) if qerm_part.m == 1 else None,
    }


def run_compare(cfg: ExperimentConfig) -> list[dict]:
    env, cls, loss = load_problem(cfg)
    rows = []
    for eps in cfg.epsilons:
        for delta in cfg.deltas:
            row = demand_comparison(cls, float(eps), float(delta))
            if env is not None and cfg.trials:
                for label, naive in (("qerm", False), ("naive", True)):
                    sub = ExperimentConfig(**{**asdict(cfg), "epsilons": [eps], "deltas": [delta],
                                              "mode": "complexity", "strategy": "best"})
                    point_rows, _ = run_qerm_sweep(sub, naive=naive)
                    row[f"{label}_failure_rate"] = sum(bool(r["failed"]) for r in point_rows) / len(point_rows)
            row["config_hash"] = cfg.hash()
            row["seed"] = cfg.seed
            rows.append(row)
    return rows


def write_rows(rows: Sequence[dict], fmt: str = "csv", columns: Sequence[str] | None = None) -> str:
    if fmt == "json":
        return json.dumps(list(rows), indent=2, default=_json_default) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))
