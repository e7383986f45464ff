"""Environments (feature states + sampling distribution) and concept-class factories."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Hashable, Sequence

import numpy as np

from .concept_class import ConceptClass, Predictor
from .quantum_core import (
    MAX_DIM,
    DensityOperator,
    ValidationError,
    basis_measurement,
    operator_from_json,
    operator_to_json,
    projector,
)
from .qerm_engine import TrainingSample

__all__ = [
    "Environment",
    "average_state",
    "draw_samples",
    "haar_unitary",
    "random_density",
    "random_pure_state",
    "classical_embed",
    "bloch_state",
    "bloch_vector",
    "orthant_rule",
    "bloch_spin_preset",
    "random_class",
    "block_groups",
    "load_environment_manifest",
    "environment_to_manifest",
]


@dataclass(frozen=True, eq=False)
class Environment:
    """Feature states ``rho_x`` with a joint distribution ``dist[x, y]``."""

    features: tuple
    labels: tuple
    states: tuple
    dist: np.ndarray

    def __post_init__(self):
        states = tuple(s if isinstance(s, DensityOperator) else DensityOperator(s) for s in self.states)
        dist = np.array(self.dist, dtype=float)
        features, labels = tuple(self.features), tuple(self.labels)
        if len(states) != len(features):
            raise ValueError("one state per feature is required")
        if dist.shape != (len(features), len(labels)):
            raise ValueError(f"distribution shape {dist.shape} != ({len(features)}, {len(labels)})")
        if dist.min() < 0.0 or abs(dist.sum() - 1.0) > 1e-9:
            raise ValidationError("distribution", abs(dist.sum() - 1.0) + max(0.0, -dist.min()), 1e-9,
                                  "D must be nonnegative and sum to one")
        if len({s.dim for s in states}) != 1:
            raise ValidationError("dimension", 1.0, 0.0, "feature states differ in dimension")
        dist.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    def average_state(self) -> DensityOperator:
        """``sum_{x,y} D(x,y) rho_x ⊗ |y><y|`` on ``H_X ⊗ H_Y``."""
        k = len(self.labels)
        d = self.dim
        out = np.zeros((d * k, d * k), dtype=np.complex128)
        for x, rho in enumerate(self.states):
            for y in range(k):
                if self.dist[x, y]:
                    out[y::k, y::k] += self.dist[x, y] * rho.matrix
        return DensityOperator(out)

    def draw_samples(self, n: int, rng: np.random.Generator) -> list[TrainingSample]:
        if n < 1:
            raise ValueError("n must be at least 1")
        k = len(self.labels)
        flat = rng.choice(self.dist.size, size=n, p=self.dist.ravel())
        return [TrainingSample(int(i // k), int(i % k), self.states[i // k], k) for i in flat]


def average_state(env: Environment) -> DensityOperator:
    return env.average_state()


def draw_samples(env: Environment, n: int, rng: np.random.Generator) -> list[TrainingSample]:
    return env.draw_samples(n, rng)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Ginibre-ensemble density operator of the given rank (full rank by default)."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real)


def classical_embed(features: Sequence[Hashable], labels: Sequence[Hashable], dist: np.ndarray,
                    functions: Sequence[Sequence[int]]) -> tuple[Environment, ConceptClass]:
    """Orthogonal-state embedding of a classical problem.

    Feature ``x`` becomes ``|x><x|`` and each hypothesis ``f`` (a list of label
    indices, one per feature) becomes the diagonal measurement
    ``M_y = sum_{x: f(x)=y} |x><x|``.
    """
    nx, ny = len(features), len(labels)
    if nx > MAX_DIM:
        raise ValidationError("max_dim", nx, MAX_DIM, "too many features to embed")
    states = [np.diag(np.eye(nx)[x]).astype(np.complex128) for x in range(nx)]
    env = Environment(tuple(features), tuple(labels), tuple(states), dist)
    povms = []
    for f in functions:
        if len(f) != nx or min(f) < 0 or max(f) >= ny:
            raise ValueError(f"hypothesis {f!r} is not a map from {nx} features to {ny} labels")
        povms.append(basis_measurement(nx, assignment=list(f), outcomes=tuple(labels)))
    return env, ConceptClass.from_povms(povms, labels)


def bloch_state(theta: float, phi: float) -> np.ndarray:
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def bloch_vector(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def orthant_rule(orthant: Sequence[int], tol_geom: float = 1e-9) -> Callable[[np.ndarray], bool]:
    """Label predicate: blue iff the Bloch vector has component <= tol along every orthant axis.

    ``orthant`` is a sign vector such as ``(1, -1, 1)``; its axes are
    ``sign_i * e_i``.
    """
    axes = np.diag(np.asarray(orthant, dtype=float))

    def is_blue(v: np.ndarray) -> bool:
        return bool(np.all(axes @ v <= tol_geom))

    return is_blue


def bloch_spin_preset(n_theta: int = 20, n_phi: int = 20, orthant: Sequence[int] = (1, 1, 1),
                      rule: Callable[[np.ndarray], bool] | None = None,
                      labels: tuple = ("blue", "red")) -> Environment:
    """Spin states on the grid ``theta_i = i pi / n_theta``, ``phi_j = 2 pi j / n_phi``.

    Each grid point is equally likely and carries a deterministic label from
    ``rule`` (default :func:`orthant_rule` of ``orthant``).
    """
    if not (1 <= n_theta <= 20 and 1 <= n_phi <= 20):
        raise ValueError("grid must fit within 20 x 20")
    rule = orthant_rule(orthant) if rule is None else rule
    feats, states = [], []
    dist = np.zeros((n_theta * n_phi, 2))
    for i in range(n_theta):
        for j in range(n_phi):
            theta, phi = i * np.pi / n_theta, 2 * np.pi * j / n_phi
            x = len(feats)
            feats.append((theta, phi))
            states.append(projector(bloch_state(theta, phi)))
            dist[x, 0 if rule(bloch_vector(theta, phi)) else 1] = 1.0
    return Environment(tuple(feats), labels, tuple(states), dist / dist.sum())


def _random_assignment(d: int, n_labels: int, rng: np.random.Generator) -> list[int]:
    """Label per basis vector, using at least two labels when possible (no trivial predictor)."""
    while True:
        a = rng.integers(0, n_labels, size=d).tolist()
        if n_labels < 2 or d < 2 or len(set(a)) >= 2:
            return a


def block_groups(k: int, m: int) -> list[list[int]]:
    """Predictor positions of each group in ``random_class(..., 'blocks', m=m)``."""
    return [g.tolist() for g in np.array_split(np.arange(k), m)]


def random_class(d: int, n_labels: int, k: int, structure: str, rng: np.random.Generator,
                 m: int | None = None) -> ConceptClass:
    """Random projective concept class.

    ``shared_basis``: all ``k`` predictors diagonal in one Haar basis.
    ``blocks``: ``m`` contiguous groups (see :func:`block_groups`), each
    with its own Haar basis.  ``haar_random``: an independent basis per
    predictor.  Every predictor uses at least two outcomes, so predictors
    from different Haar bases do not commute (with probability one).
    """
    if k < 1 or d < 1 or n_labels < 1:
        raise ValueError("d, n_labels and k must be positive")
    labels = tuple(range(n_labels))
    if structure == "shared_basis":
        groups = [list(range(k))]
    elif structure == "blocks":
        if m is None or not 1 <= m <= k:
            raise ValueError("blocks structure needs 1 <= m <= k")
        groups = block_groups(k, m)
    elif structure == "haar_random":
        groups = [[j] for j in range(k)]
    else:
        raise ValueError(f"unknown structure {structure!r}")
    povms = [None] * k
    for g in groups:
        u = haar_unitary(d, rng)
        for j in g:
            povms[j] = basis_measurement(d, u, _random_assignment(d, n_labels, rng), labels)
    return ConceptClass(tuple(Predictor(j, p) for j, p in enumerate(povms)), labels)


def environment_to_manifest(env: Environment) -> dict:
    return {
        "dim": env.dim,
        "features": [list(f) if isinstance(f, tuple) else f for f in env.features],
        "labels": list(env.labels),
        "states": [operator_to_json(s) for s in env.states],
        "dist": env.dist.tolist(),
    }


def load_environment_manifest(source: str | Path | dict) -> Environment:
    doc = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    states = [operator_from_json(s, density=True) for s in doc["states"]]
    features = doc.get("features", list(range(len(states))))
    features = [tuple(f) if isinstance(f, list) else f for f in features]
    env = Environment(tuple(features), tuple(doc["labels"]), tuple(states), doc["dist"])
    if "dim" in doc and int(doc["dim"]) != env.dim:
        raise ValidationError("dimension", abs(int(doc["dim"]) - env.dim), 0.0, "manifest dim")
    return env
