"""Named (environment, concept class, loss) triples addressable from the CLI."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .concept_class import ConceptClass, LossFunction, Predictor
from .quantum_core import ProjectivePovm, basis_measurement, projector
from .synthetic_env import (
    Environment,
    bloch_spin_preset,
    block_groups,
    classical_embed,
    haar_unitary,
    random_class,
    random_density,
)

__all__ = ["PRESETS", "load_preset", "realizable_preset", "preset_names"]

Preset = tuple[Environment, ConceptClass, LossFunction]


def _distinct_assignments(d: int, n_labels: int, count: int, rng: np.random.Generator,
                          exclude: list[int]) -> list[list[int]]:
    out: list[list[int]] = []
    seen = {tuple(exclude)}
    while len(out) < count:
        a = rng.integers(0, n_labels, size=d).tolist()
        if len(set(a)) < min(2, n_labels) or tuple(a) in seen:
            continue
        seen.add(tuple(a))
        out.append(a)
    return out


def realizable_preset(d: int = 4, k: int = 8, n_labels: int = 2, structure: str = "shared_basis",
                      m: int = 1, target_group: int = 0, n_features: int = 6, seed: int = 0) -> Preset:
    """Realizable environment for a random class with a known zero-risk predictor.

    The target is the first predictor of ``target_group``.  Its basis vectors
    are split evenly among the labels, and each feature state is a random
    pure state inside the range of one target element, labelled by that
    element.  Predictors sharing the target's basis get distinct labellings,
    so the target is the unique zero-risk predictor.
    """
    rng = np.random.default_rng(seed)
    labels = tuple(range(n_labels))
    groups = [list(range(k))] if structure == "shared_basis" else block_groups(k, m)
    target_pos = groups[target_group][0]
    target_assign = [i * n_labels // d for i in range(d)]
    povms = [None] * k
    bases = []
    for g in groups:
        u = haar_unitary(d, rng)
        bases.append(u)
        if target_pos in g:
            povms[target_pos] = basis_measurement(d, u, target_assign, labels)
            rest = [j for j in g if j != target_pos]
            assigns = _distinct_assignments(d, n_labels, len(rest), rng, target_assign)
        else:
            rest = g
            assigns = _distinct_assignments(d, n_labels, len(rest), rng, [])
        for j, a in zip(rest, assigns):
            povms[j] = basis_measurement(d, u, a, labels)
    cls = ConceptClass(tuple(Predictor(j, p) for j, p in enumerate(povms)), labels)

    u = bases[target_group]
    states, ys = [], []
    for x in range(n_features):
        y = x % n_labels
        cols = [i for i, a in enumerate(target_assign) if a == y]
        coef = rng.standard_normal(len(cols)) + 1j * rng.standard_normal(len(cols))
        v = u[:, cols] @ (coef / np.linalg.norm(coef))
        states.append(projector(v))
        ys.append(y)
    dist = np.zeros((n_features, n_labels))
    dist[np.arange(n_features), ys] = 1.0 / n_features
    env = Environment(tuple(range(n_features)), labels, tuple(states), dist)
    return env, cls, LossFunction.zero_one(labels)


def _haar_preset(seed: int = 0) -> Preset:
    rng = np.random.default_rng(seed)
    cls = random_class(2, 2, 5, "haar_random", rng)
    states = tuple(random_density(2, rng) for _ in range(4))
    dist = rng.dirichlet(np.ones(8)).reshape(4, 2)
    env = Environment(tuple(range(4)), cls.labels, states, dist)
    return env, cls, LossFunction.zero_one(cls.labels)


def _bloch_preset(seed: int = 0) -> Preset:
    env = bloch_spin_preset()
    axes = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1), (-1, 1, 1), (1, -1, 1), (1, 1, -1)]
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    povms = []
    for a in axes:
        n = np.asarray(a, dtype=float) / np.linalg.norm(a)
        ns = sum(c * p for c, p in zip(n, paulis))
        # blue when the spin points against the axis
        blue = 0.5 * (np.eye(2) - ns)
        povms.append((blue, np.eye(2) - blue))
    cls = ConceptClass.from_povms([ProjectivePovm(env.labels, p) for p in povms], env.labels)
    return env, cls, LossFunction.zero_one(env.labels)


def _classical_preset(seed: int = 0) -> Preset:
    rng = np.random.default_rng(seed)
    nx, ny, k = 6, 2, 8
    funcs = [rng.integers(0, ny, size=nx).tolist() for _ in range(k)]
    dist = np.zeros((nx, ny))
    px = rng.dirichlet(np.ones(nx))
    dist[np.arange(nx), funcs[0]] = px
    env, cls = classical_embed(list(range(nx)), list(range(ny)), dist, funcs)
    return env, cls, LossFunction.zero_one(cls.labels)


PRESETS: dict[str, Callable[..., Preset]] = {
    "shared-realizable": lambda seed=0: realizable_preset(4, 8, seed=seed),
    "shared16": lambda seed=0: realizable_preset(8, 16, n_features=8, seed=seed),
    "blocks2": lambda seed=0: realizable_preset(4, 6, structure="blocks", m=2, target_group=1, seed=seed),
    "blocks3": lambda seed=0: realizable_preset(4, 9, structure="blocks", m=3, target_group=2, seed=seed),
    "haar5": _haar_preset,
    "bloch": _bloch_preset,
    "classical": _classical_preset,
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def load_preset(name: str, seed: int = 0) -> Preset:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {preset_names()}") from None
    return factory(seed=seed)
