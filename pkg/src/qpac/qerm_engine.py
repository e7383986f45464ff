"""Quantum empirical risk minimisation over a compatibility partition.

Samples are single-use: each :class:`TrainingSample` may be measured once,
and the engine assigns every sample to exactly one subclass batch.  Within a
batch the whole subclass is measured jointly by sampling an index of the
subclass's shared eigenbasis, which reproduces the Born statistics of the
product of the per-predictor loss observables without building them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence, Union

import numpy as np

from .concept_class import (
    CompatibilityPartition,
    ConceptClass,
    LossFunction,
    LossObservable,
    Predictor,
    batch_size,
    best_partition,
    opt_risk,
    partition_compatible,
    singleton_partition,
    true_risk,
)
from .quantum_core import TOL, DensityOperator, Povm, SharedBasis, ValidationError, born_distribution

if TYPE_CHECKING:
    from .synthetic_env import Environment

__all__ = [
    "SampleConsumedError",
    "InsufficientSamplesError",
    "TrainingSample",
    "BatchPlan",
    "QermReport",
    "plan_batches",
    "measure_subclass",
    "joint_loss_distribution",
    "run_qerm",
    "run_naive",
    "deviation_bound",
    "uniform_radius",
    "naive_radius",
    "check_concentration",
]


class SampleConsumedError(RuntimeError):
    """A quantum sample was handed to a second measurement."""

    code = "E_SAMPLE_CONSUMED"


class InsufficientSamplesError(ValueError):
    code = "E_INSUFFICIENT_SAMPLES"


@dataclass(eq=False)
class TrainingSample:
    """One copy of ``rho_x ⊗ |y><y|``; ``y`` is a label index."""

    x: int
    y: int
    feature_state: DensityOperator
    n_labels: int
    consumed: bool = False

    @property
    def state(self) -> DensityOperator:
        label = np.zeros((self.n_labels, self.n_labels))
        label[self.y, self.y] = 1.0
        return DensityOperator(np.kron(self.feature_state.matrix, label))

    def consume(self) -> None:
        if self.consumed:
            raise SampleConsumedError(f"sample (x={self.x}, y={self.y}) was already measured")
        self.consumed = True


@dataclass(frozen=True)
class BatchPlan:
    partition: CompatibilityPartition
    batch_sizes: tuple
    mode: str
    epsilon: float
    delta: float

    @property
    def total(self) -> int:
        return sum(self.batch_sizes)

    def offsets(self) -> list[int]:
        return [0, *np.cumsum(self.batch_sizes).tolist()]


def plan_batches(partition: CompatibilityPartition, epsilon: float, delta: float,
                 mode: str = "complexity", total_n: int | None = None) -> BatchPlan:
    """Batch sizes per subclass.

    ``complexity`` uses ``ceil(8/eps^2 ln(2 m |C_r| / delta))`` for each
    subclass.  ``budget`` splits ``total_n`` in proportion to those sizes:
    every batch gets one sample, the rest is split by floor, and leftover
    samples go to the largest subclasses first.
    """
    m = partition.m
    weights = [batch_size(s, m, epsilon, delta) for s in partition.sizes]
    if mode == "complexity":
        sizes = weights
    elif mode == "budget":
        if total_n is None or total_n < m:
            raise InsufficientSamplesError(f"budget of {total_n} samples cannot cover {m} subclasses")
        spare = total_n - m
        w = sum(weights)
        sizes = [1 + spare * wi // w for wi in weights]
        left = total_n - sum(sizes)
        by_size = sorted(range(m), key=lambda r: (-partition.sizes[r], r))
        for i in range(left):
            sizes[by_size[i % m]] += 1
    else:
        raise ValueError(f"unknown batch mode {mode!r}")
    return BatchPlan(partition, tuple(int(s) for s in sizes), mode, epsilon, delta)


def _basis_probs(basis: np.ndarray, rho_x: np.ndarray) -> np.ndarray:
    p = np.einsum("ik,il,lk->k", basis.conj(), rho_x, basis).real
    lo = p.min()
    if lo < -TOL.prob or abs(p.sum() - 1.0) > TOL.prob:
        raise ValidationError("probability_mass", max(-lo, abs(p.sum() - 1.0)), TOL.prob)
    p = np.clip(p, 0.0, None)
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    return cdf


def _loss_lookup(table: np.ndarray, loss: LossFunction) -> np.ndarray:
    """``out[k, y, j] = loss(y, outcome of predictor j on basis vector k)``."""
    return np.transpose(loss.table[:, table], (1, 0, 2))


def _check_subclass(predictors: Sequence[Predictor], shared: SharedBasis) -> None:
    if shared.outcome_table.shape[1] != len(predictors):
        raise ValueError("outcome table does not match subclass size")


def measure_subclass(predictors: Sequence[Predictor], shared: SharedBasis,
                     sample: TrainingSample, loss: LossFunction,
                     rng: np.random.Generator) -> np.ndarray:
    """Jointly measure every predictor's loss on one sample; consumes the sample.

    Measuring in the extended basis ``{|u_k> ⊗ |y'>}`` gives probability
    ``<u_k|rho_x|u_k> * [y' == y]``, so only the feature factor is sampled.
    """
    _check_subclass(predictors, shared)
    sample.consume()
    cdf = _basis_probs(shared.basis, sample.feature_state.matrix)
    k = int(np.searchsorted(cdf, rng.random(), side="right"))
    return loss.table[sample.y, shared.outcome_table[k]]


def joint_loss_distribution(predictors: Sequence[Predictor], shared: SharedBasis,
                            rho_xy: DensityOperator, loss: LossFunction) -> dict[tuple, float]:
    """Exact distribution of the joint loss vector for a state on ``H_X ⊗ H_Y``."""
    _check_subclass(predictors, shared)
    d, ny = shared.basis.shape[0], len(loss.labels)
    if rho_xy.dim != d * ny:
        raise ValidationError("dimension", abs(rho_xy.dim - d * ny), 0.0)
    r = rho_xy.matrix.reshape(d, ny, d, ny)
    u = shared.basis
    # p[k, y] = <u_k, y| rho |u_k, y>
    p = np.einsum("ik,iyly,lk->ky", u.conj(), r, u).real
    dist: dict[tuple, float] = {}
    for k in range(d):
        for y in range(ny):
            z = tuple(float(v) for v in loss.table[y, shared.outcome_table[k]])
            dist[z] = dist.get(z, 0.0) + float(p[k, y])
    return dist


@dataclass
class QermReport:
    partition: CompatibilityPartition
    batch_sizes: tuple
    empirical_losses: dict
    selected_r: int
    selected_j: int
    selected_id: int
    mode: str
    epsilon: float
    delta: float
    true_risk_selected: float | None = None
    opt: float | None = None
    opt_id: int | None = None

    @property
    def n_total(self) -> int:
        return sum(self.batch_sizes)

    @property
    def m(self) -> int:
        return self.partition.m

    @property
    def selected_loss(self) -> float:
        return self.empirical_losses[self.selected_id]

    @property
    def excess(self) -> float | None:
        if self.true_risk_selected is None or self.opt is None:
            return None
        return self.true_risk_selected - self.opt

    def failed(self, epsilon: float | None = None) -> bool | None:
        eps = self.epsilon if epsilon is None else epsilon
        return None if self.excess is None else bool(self.excess > eps)

    def to_json(self) -> dict:
        return {
            "partition": self.partition.to_json(self.epsilon, self.delta),
            "batch_sizes": list(self.batch_sizes),
            "mode": self.mode,
            "empirical_losses": {str(k): v for k, v in self.empirical_losses.items()},
            "selected": {"r": self.selected_r, "j": self.selected_j, "id": self.selected_id},
            "true_risk_selected": self.true_risk_selected,
            "opt": self.opt,
            "excess": self.excess,
        }


SampleSource = Union[Sequence[TrainingSample], None]


def _execute(partition: CompatibilityPartition, plan: BatchPlan, loss: LossFunction,
             samples: Sequence[TrainingSample], rng: np.random.Generator) -> dict:
    if len(samples) < plan.total:
        raise InsufficientSamplesError(f"need {plan.total} samples, got {len(samples)}")
    offsets = plan.offsets()
    losses: dict[int, float] = {}
    for r in range(partition.m):
        shared = partition.bases[r]
        lookup = _loss_lookup(shared.outcome_table, loss)
        batch = samples[offsets[r]:offsets[r + 1]]
        cdfs: dict[int, np.ndarray] = {}
        totals = np.zeros(len(partition.subclasses[r]))
        for s in batch:
            s.consume()
            # samples sharing x share rho_x
            cdf = cdfs.get(s.x)
            if cdf is None:
                cdf = cdfs[s.x] = _basis_probs(shared.basis, s.feature_state.matrix)
            k = int(np.searchsorted(cdf, rng.random(), side="right"))
            totals += lookup[k, s.y]
        for pid, tot in zip(partition.subclasses[r], totals / len(batch)):
            losses[pid] = float(tot)
    return losses


def run_qerm(concept_class: ConceptClass, loss: LossFunction, *, epsilon: float, delta: float,
             samples: SampleSource = None, env: "Environment | None" = None,
             rng: np.random.Generator | None = None, strategy: str = "greedy",
             mode: str = "complexity", total_n: int | None = None,
             partition: CompatibilityPartition | None = None) -> QermReport:
    """Partition, batch, jointly measure and return the empirical argmin.

    Samples are read in arrival order: the first ``n_1`` go to subclass 1 and
    so on.  Without ``samples`` they are drawn from ``env`` with ``rng``.
    ``strategy='best'`` picks the partition with the smallest objective.
    """
    if partition is None:
        if strategy == "best":
            partition = best_partition(concept_class, epsilon, delta)
        else:
            partition = partition_compatible(concept_class, strategy)
    plan = plan_batches(partition, epsilon, delta, mode, total_n)
    if rng is None:
        raise ValueError("run_qerm needs a random generator for the measurements")
    if samples is None:
        if env is None:
            raise ValueError("either samples or an environment is required")
        samples = env.draw_samples(plan.total, rng)
    losses = _execute(partition, plan, loss, samples, rng)

    best = (math.inf, 0, 0)
    for r, sub in enumerate(partition.subclasses):
        for j, pid in enumerate(sub):
            if losses[pid] < best[0]:
                best = (losses[pid], r, j)
    _, r, j = best
    report = QermReport(partition, plan.batch_sizes, losses, r, j, partition.subclasses[r][j],
                        mode, epsilon, delta)
    if env is not None:
        report.true_risk_selected = true_risk(concept_class.get(report.selected_id), env, loss)
        report.opt, report.opt_id = opt_risk(concept_class, env, loss)
    return report


def run_naive(concept_class: ConceptClass, loss: LossFunction, **kwargs) -> QermReport:
    """One batch per predictor, each measured on its own."""
    kwargs.pop("strategy", None)
    return run_qerm(concept_class, loss, partition=singleton_partition(concept_class), **kwargs)


def deviation_bound(n: int, b_minus_a: float, delta: float) -> float:
    """Deviation ``t`` at which the two-sided tail bound ``2 exp(-n t^2 / 2(b-a)^2)`` equals ``delta``."""
    if n < 1 or not b_minus_a > 0 or not 0.0 < delta < 1.0:
        raise ValueError(f"invalid parameters n={n}, b-a={b_minus_a}, delta={delta}")
    return b_minus_a * math.sqrt(2.0 / n * math.log(2.0 / delta))


def uniform_radius(n: int, class_size: int, delta: float) -> float:
    """Uniform deviation radius for a compatible class measured on ``n`` shared samples."""
    return deviation_bound(n, 1.0, delta / class_size)


def naive_radius(n: int, class_size: int, delta: float) -> float:
    """Uniform radius when ``n`` samples are split evenly, one batch per predictor."""
    if n < 1 or not 0.0 < delta < 1.0:
        raise ValueError("invalid parameters")
    return math.sqrt(2.0 * class_size / n * math.log(2.0 / delta))


StateSource = Union[DensityOperator, tuple]


def check_concentration(observable: LossObservable | Povm, rho_source: StateSource, n: int,
                        trials: int, rng: np.random.Generator, t: float) -> float:
    """Fraction of ``trials`` whose n-sample empirical mean deviates from the mean by at least ``t``.

    ``rho_source`` is either a fixed state or a ``(weights, states)``
    ensemble from which each sample's state is drawn iid; the reference
    mean is the expectation value in the average state.  Outcome labels of
    ``observable`` are taken as its numeric values.
    """
    povm = observable.povm if isinstance(observable, LossObservable) else observable
    values = np.asarray(povm.outcomes, dtype=float)
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be positive")

    if isinstance(rho_source, DensityOperator):
        p = born_distribution(povm, rho_source)
        counts = rng.multinomial(n, p, size=trials)
        means = counts @ values / n
        expected = float(values @ p)
    else:
        weights, states = rho_source
        weights = np.asarray(weights, dtype=float)
        probs = np.stack([born_distribution(povm, s) for s in states])
        expected = float(weights @ probs @ values)
        state_counts = rng.multinomial(n, weights, size=trials)
        totals = np.zeros(trials)
        for s in range(len(states)):
            totals += rng.multinomial(state_counts[:, s], probs[s]) @ values
        means = totals / n
    return float(np.mean(np.abs(means - expected) >= t))
