"""Predictors, loss observables, true risk and compatibility partitioning."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Hashable, Sequence

import numpy as np

from .quantum_core import (
    TOL,
    DensityOperator,
    Povm,
    ProjectivePovm,
    Tolerances,
    ValidationError,
    born_distribution,
    povm_from_json,
    povm_to_json,
    simultaneous_eigenbasis,
)

if TYPE_CHECKING:
    from .synthetic_env import Environment

__all__ = [
    "LossFunction",
    "Predictor",
    "ConceptClass",
    "LossObservable",
    "CompatibilityPartition",
    "PartitionTooLargeError",
    "loss_observable",
    "true_risk",
    "observable_risk",
    "opt_risk",
    "are_compatible",
    "compatibility_graph",
    "partition_compatible",
    "singleton_partition",
    "best_partition",
    "objective_of_partition",
    "compatible_class_bound",
    "load_class_manifest",
    "class_to_manifest",
]

EXACT_LIMIT = 14


@dataclass(frozen=True, eq=False)
class LossFunction:
    """Loss table ``table[y, y_hat]`` over a finite label alphabet."""

    labels: tuple
    table: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        t = np.array(self.table, dtype=float)
        if t.shape != (len(labels), len(labels)):
            raise ValueError(f"loss table shape {t.shape} does not match {len(labels)} labels")
        if not np.all(np.isfinite(t)) or t.min() < 0.0 or t.max() > 1.0:
            raise ValueError("loss values must lie in [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "table", t)

    @classmethod
    def zero_one(cls, labels: Sequence[Hashable]) -> "LossFunction":
        k = len(labels)
        return cls(tuple(labels), 1.0 - np.eye(k))

    @classmethod
    def constant(cls, labels: Sequence[Hashable], value: float = 0.0) -> "LossFunction":
        k = len(labels)
        return cls(tuple(labels), np.full((k, k), float(value)))

    @property
    def image_set(self) -> np.ndarray:
        return np.unique(self.table)

    def to_json(self) -> dict:
        if np.array_equal(self.table, 1.0 - np.eye(len(self.labels))):
            return {"type": "zero_one"}
        return {"table": self.table.tolist()}

    @classmethod
    def from_json(cls, doc: dict, labels: Sequence[Hashable]) -> "LossFunction":
        if doc.get("type") == "zero_one":
            return cls.zero_one(labels)
        if "table" in doc:
            return cls(tuple(labels), doc["table"])
        raise ValueError(f"unrecognised loss description {doc!r}")


@dataclass(frozen=True, eq=False)
class Predictor:
    id: int
    povm: ProjectivePovm

    def __post_init__(self):
        if not isinstance(self.povm, ProjectivePovm):
            raise ValidationError("projectivity", np.inf, 0.0,
                                  f"predictor {self.id} is not a projective measurement")

    @property
    def dim(self) -> int:
        return self.povm.dim

    @property
    def elements(self) -> np.ndarray:
        return self.povm.stacked()


@dataclass(frozen=True, eq=False)
class ConceptClass:
    """Finite, ordered collection of sharp predictors over one label alphabet."""

    predictors: tuple
    labels: tuple

    def __post_init__(self):
        preds = tuple(self.predictors)
        labels = tuple(self.labels)
        if not preds:
            raise ValueError("concept class must be nonempty")
        ids = [p.id for p in preds]
        if len(set(ids)) != len(ids):
            raise ValueError("predictor ids must be unique")
        d = preds[0].dim
        for p in preds:
            if p.dim != d:
                raise ValidationError("dimension", abs(p.dim - d), 0.0, f"predictor {p.id}")
            if p.povm.outcomes != labels:
                raise ValueError(f"predictor {p.id} outcomes {p.povm.outcomes} != labels {labels}")
        object.__setattr__(self, "predictors", preds)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_pos", {p.id: i for i, p in enumerate(preds)})

    @classmethod
    def from_povms(cls, povms: Sequence[Povm], labels: Sequence[Hashable] | None = None) -> "ConceptClass":
        labels = tuple(povms[0].outcomes) if labels is None else tuple(labels)
        return cls(tuple(Predictor(i, m) for i, m in enumerate(povms)), labels)

    @property
    def dim(self) -> int:
        return self.predictors[0].dim

    @property
    def ids(self) -> list[int]:
        return [p.id for p in self.predictors]

    def __len__(self) -> int:
        return len(self.predictors)

    def __iter__(self):
        return iter(self.predictors)

    def position(self, pid: int) -> int:
        return self._pos[pid]

    def get(self, pid: int) -> Predictor:
        return self.predictors[self._pos[pid]]


@dataclass(frozen=True, eq=False)
class LossObservable:
    """Loss-valued measurement on ``H_X ⊗ H_Y``; ``povm.outcomes`` are the loss values."""

    predictor_id: int
    povm: Povm

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.povm.outcomes, dtype=float)

    def expectation(self, rho: DensityOperator) -> float:
        return float(self.values @ born_distribution(self.povm, rho))


def loss_observable(p: Predictor, loss: LossFunction) -> LossObservable:
    """``L_z = sum over (y, y_hat) with loss z of M_{y_hat} ⊗ |y><y|``."""
    if p.povm.outcomes != loss.labels:
        raise ValueError("predictor outcomes and loss labels differ")
    k = len(loss.labels)
    d = p.dim
    m = p.elements
    ops = []
    for z in loss.image_set:
        op = np.zeros((d * k, d * k), dtype=np.complex128)
        for y in range(k):
            for y_hat in range(k):
                if loss.table[y, y_hat] == z:
                    # M ⊗ |y><y| puts M on the (y, y) block of the label index
                    op[y::k, y::k] += m[y_hat]
        ops.append(op)
    cls = ProjectivePovm if isinstance(p.povm, ProjectivePovm) else Povm
    return LossObservable(p.id, cls(tuple(float(z) for z in loss.image_set), tuple(ops)))


def _check_env(env: "Environment", p: Predictor, loss: LossFunction) -> None:
    if env.dim != p.dim:
        raise ValidationError("dimension", abs(env.dim - p.dim), 0.0, "environment vs predictor")
    if tuple(env.labels) != loss.labels:
        raise ValueError("environment labels differ from loss labels")


def true_risk(p: Predictor, env: "Environment", loss: LossFunction) -> float:
    """``sum_{x,y,y_hat} D(x,y) loss(y,y_hat) Re tr(M_{y_hat} rho_x)``."""
    _check_env(env, p, loss)
    risk = 0.0
    for x, rho in enumerate(env.states):
        probs = born_distribution(p.povm, rho)
        risk += float(env.dist[x] @ loss.table @ probs)
    return risk


def observable_risk(p: Predictor, env: "Environment", loss: LossFunction) -> float:
    """True risk as the expectation of the loss observable in the average joint state."""
    _check_env(env, p, loss)
    return loss_observable(p, loss).expectation(env.average_state())


def opt_risk(c: ConceptClass, env: "Environment", loss: LossFunction) -> tuple[float, int]:
    """Smallest true risk in the class and the id of the first predictor attaining it."""
    best, best_id = math.inf, None
    for p in c:
        r = true_risk(p, env, loss)
        if r < best:
            best, best_id = r, p.id
    return best, best_id


def are_compatible(p: Predictor, q: Predictor, tol: Tolerances = TOL) -> bool:
    if p.dim != q.dim:
        raise ValidationError("dimension", abs(p.dim - q.dim), 0.0)
    for a in p.elements:
        na = np.linalg.norm(a)
        for b in q.elements:
            res = np.linalg.norm(a @ b - b @ a)
            if res > tol.commute * na * np.linalg.norm(b):
                return False
    return True


def compatibility_graph(c: ConceptClass, tol: Tolerances = TOL) -> np.ndarray:
    k = len(c)
    adj = np.eye(k, dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            adj[i, j] = adj[j, i] = are_compatible(c.predictors[i], c.predictors[j], tol)
    return adj


class PartitionTooLargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CompatibilityPartition:
    """Disjoint cover of a class by internally compatible subclasses.

    ``subclasses`` hold predictor ids; ``bases[r]`` is the shared eigenbasis
    of subclass ``r`` with its outcome table columns in subclass order.
    """

    concept_class: ConceptClass
    subclasses: tuple
    strategy: str
    bases: tuple = field(default=(), repr=False)

    def __post_init__(self):
        subs = tuple(tuple(s) for s in self.subclasses)
        flat = [i for s in subs for i in s]
        if any(len(s) == 0 for s in subs):
            raise ValueError("empty subclass")
        if sorted(flat) != sorted(self.concept_class.ids) or len(set(flat)) != len(flat):
            raise ValueError("subclasses do not partition the class")
        object.__setattr__(self, "subclasses", subs)
        if not self.bases:
            bases = tuple(simultaneous_eigenbasis([self.concept_class.get(i).povm for i in s])
                          for s in subs)
            object.__setattr__(self, "bases", bases)

    @property
    def m(self) -> int:
        return len(self.subclasses)

    @property
    def sizes(self) -> list[int]:
        return [len(s) for s in self.subclasses]

    def members(self, r: int) -> list[Predictor]:
        return [self.concept_class.get(i) for i in self.subclasses[r]]

    def to_json(self, epsilon: float | None = None, delta: float | None = None) -> dict:
        doc = {"m": self.m, "subclasses": [list(s) for s in self.subclasses], "strategy": self.strategy}
        if epsilon is not None and delta is not None:
            doc["objective"] = objective_of_partition(self, epsilon, delta)
        return doc


def _greedy(adj: np.ndarray, order: Sequence[int]) -> list[list[int]]:
    cliques: list[list[int]] = []
    for v in order:
        for cl in cliques:
            if all(adj[v, u] for u in cl):
                cl.append(v)
                break
        else:
            cliques.append([v])
    return cliques


def _exact(adj: np.ndarray) -> list[list[int]]:
    """Minimum clique cover by depth-first branch and bound.

    Among covers with the fewest cliques, the one with the smallest product
    of clique sizes wins (smallest sample-bound objective), then the
    lexicographically smallest.
    """
    k = adj.shape[0]
    best: dict = {"key": (k + 1, math.inf, ()), "cover": None}
    cliques: list[list[int]] = []

    def dfs(v: int, prod: int) -> None:
        count = len(cliques)
        if (count, prod) > best["key"][:2]:
            return
        if v == k:
            canon = tuple(tuple(c) for c in cliques)
            key = (count, prod, canon)
            if key < best["key"]:
                best["key"] = key
                best["cover"] = [list(c) for c in cliques]
            return
        for cl in cliques:
            if all(adj[v, u] for u in cl):
                n = len(cl)
                cl.append(v)
                dfs(v + 1, prod // n * (n + 1))
                cl.pop()
        if count + 1 <= best["key"][0]:
            cliques.append([v])
            dfs(v + 1, prod)
            cliques.pop()

    dfs(0, 1)
    return best["cover"]


def singleton_partition(c: ConceptClass) -> CompatibilityPartition:
    return CompatibilityPartition(c, tuple((i,) for i in c.ids), "singleton")


def partition_compatible(c: ConceptClass, strategy: str = "greedy", *,
                         order: Sequence[int] | None = None,
                         exact_limit: int = EXACT_LIMIT,
                         tol: Tolerances = TOL) -> CompatibilityPartition:
    """Split ``c`` into compatible subclasses.

    ``greedy`` is first-fit in index order (or ``order``, a permutation of
    positions); ``exact`` is a minimum clique cover of the commutativity
    graph and refuses classes larger than ``exact_limit``; ``singleton``
    puts every predictor on its own.
    """
    if strategy == "singleton":
        return singleton_partition(c)
    if strategy == "exact" and len(c) > exact_limit:
        raise PartitionTooLargeError(f"exact partitioning limited to {exact_limit} predictors, got {len(c)}")
    adj = compatibility_graph(c, tol)
    if strategy == "greedy":
        order = range(len(c)) if order is None else order
        cover = _greedy(adj, order)
    elif strategy == "exact":
        cover = _exact(adj)
    else:
        raise ValueError(f"unknown partition strategy {strategy!r}")
    ids = c.ids
    return CompatibilityPartition(c, tuple(tuple(ids[i] for i in cl) for cl in cover), strategy)


def best_partition(c: ConceptClass, epsilon: float, delta: float, *,
                   exact_limit: int = EXACT_LIMIT) -> CompatibilityPartition:
    """Partition with the smallest sample-bound objective among greedy, exact and singleton.

    Ties go to the earlier strategy in that order.
    """
    candidates = [partition_compatible(c, "greedy")]
    if len(c) <= exact_limit:
        candidates.append(partition_compatible(c, "exact"))
    candidates.append(singleton_partition(c))
    return min(candidates, key=lambda p: objective_of_partition(p, epsilon, delta))


def _check_eps_delta(epsilon: float, delta: float) -> None:
    if not (0.0 < epsilon < 1.0 and 0.0 < delta < 1.0):
        raise ValueError(f"epsilon and delta must lie in (0, 1), got {epsilon}, {delta}")


def batch_size(subclass_size: int, m: int, epsilon: float, delta: float) -> int:
    """``ceil(8/eps^2 * ln(2 m |C_r| / delta))``."""
    _check_eps_delta(epsilon, delta)
    return math.ceil(8.0 / epsilon**2 * math.log(2.0 * m * subclass_size / delta))


def objective_of_partition(partition: CompatibilityPartition | Sequence[int],
                           epsilon: float, delta: float) -> int:
    """Total sample demand of a partition (accepts subclass sizes directly)."""
    sizes = partition.sizes if isinstance(partition, CompatibilityPartition) else list(partition)
    m = len(sizes)
    return sum(batch_size(s, m, epsilon, delta) for s in sizes)


def compatible_class_bound(class_size: int, epsilon: float, delta: float) -> int:
    """Compatible-class bound ``ceil(2/eps^2 * ln(|C| / delta))``, reported for comparison only."""
    _check_eps_delta(epsilon, delta)
    return math.ceil(2.0 / epsilon**2 * math.log(class_size / delta))


def load_class_manifest(source: str | Path | dict) -> tuple[ConceptClass, LossFunction]:
    doc = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    labels = tuple(doc["labels"])
    preds = []
    for entry in doc["predictors"]:
        povm = povm_from_json({"outcomes": labels, "elements": entry["elements"]}, projective=True)
        preds.append(Predictor(int(entry["id"]), povm))
    c = ConceptClass(tuple(preds), labels)
    if "dim" in doc and int(doc["dim"]) != c.dim:
        raise ValidationError("dimension", abs(int(doc["dim"]) - c.dim), 0.0, "manifest dim")
    loss = LossFunction.from_json(doc.get("loss", {"type": "zero_one"}), labels)
    return c, loss


def class_to_manifest(c: ConceptClass, loss: LossFunction | None = None) -> dict:
    doc = {
        "dim": c.dim,
        "labels": list(c.labels),
        "predictors": [{"id": p.id, "elements": povm_to_json(p.povm)["elements"]} for p in c],
    }
    doc["loss"] = (loss or LossFunction.zero_one(c.labels)).to_json()
    return doc
