"""Dense complex-matrix foundation: validated states, POVMs and Born-rule sampling.

Every operator type here is an immutable, validated wrapper around a
``complex128`` numpy array.  Validation happens once at construction; the
residual of each check is available through :func:`operator_checks` and
:func:`povm_checks` so that callers can report on invalid input without
catching exceptions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Hashable, Sequence

import numpy as np

__all__ = [
    "Tolerances",
    "TOL",
    "MAX_DIM",
    "ValidationError",
    "EigenDecompositionError",
    "Check",
    "HermitianOperator",
    "DensityOperator",
    "Povm",
    "ProjectivePovm",
    "SharedBasis",
    "tensor",
    "born_distribution",
    "born_sample",
    "eig_hermitian",
    "simultaneous_eigenbasis",
    "operator_checks",
    "povm_checks",
    "ket",
    "projector",
    "basis_measurement",
    "operator_to_json",
    "matrix_from_json",
    "operator_from_json",
    "povm_to_json",
    "povm_from_json",
]


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-9      # relative, Frobenius
    proj: float = 1e-9      # relative, Frobenius
    complete: float = 1e-9  # elementwise on sum(M_v) - I
    diag: float = 1e-9      # relative off-diagonal mass
    trace: float = 1e-9     # absolute
    prob: float = 1e-9      # absolute
    psd: float = 1e-10      # smallest eigenvalue floor
    commute: float = 1e-9   # relative to |A|_F |B|_F
    eig: float = 1e-10      # relative reconstruction error


TOL = Tolerances()
MAX_DIM = 256


class ValidationError(ValueError):
    """An operator failed one of the named invariant checks."""

    def __init__(self, check: str, residual: float, threshold: float, detail: str = ""):
        self.check = check
        self.residual = float(residual)
        self.threshold = float(threshold)
        msg = f"{check} check failed: residual {self.residual:.3e} > {self.threshold:.3e}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EigenDecompositionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.threshold)

    def as_dict(self) -> dict:
        return {"check": self.name, "passed": self.passed,
                "residual": self.residual, "threshold": self.threshold}


def _frob(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def _as_matrix(data: Any) -> np.ndarray:
    a = np.array(data, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValidationError("shape", np.inf, 0.0, f"expected a non-empty matrix, got shape {a.shape}")
    return a


def operator_checks(matrix: np.ndarray, tol: Tolerances = TOL, *, density: bool = False) -> list[Check]:
    """Residuals for finiteness, squareness, Hermiticity and optionally the density checks."""
    a = np.asarray(matrix)
    checks = [Check("finite", 0.0 if np.all(np.isfinite(a)) else np.inf, 0.0),
              Check("square", 0.0 if a.shape[0] == a.shape[1] else np.inf, 0.0)]
    if not all(c.passed for c in checks):
        return checks
    norm = _frob(a)
    herm = _frob(a - a.conj().T) / norm if norm > 0 else 0.0
    checks.append(Check("hermiticity", herm, tol.herm))
    if density:
        checks.append(Check("trace", abs(np.trace(a).real - 1.0), tol.trace))
        if herm <= tol.herm:
            lam_min = float(np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0])
            checks.append(Check("psd", max(0.0, -lam_min), tol.psd))
    return checks


def _raise_first(checks: Sequence[Check], detail: str = "") -> None:
    for c in checks:
        if not c.passed:
            raise ValidationError(c.name, c.residual, c.threshold, detail)


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Square complex matrix validated to be Hermitian within ``tol.herm``."""

    matrix: np.ndarray
    tol: Tolerances = field(default=TOL, repr=False)

    def __post_init__(self):
        a = _as_matrix(self.matrix)
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        _raise_first(self._checks())

    def _checks(self) -> list[Check]:
        return operator_checks(self.matrix, self.tol)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


@dataclass(frozen=True, eq=False, repr=False)
class DensityOperator(HermitianOperator):
    """Unit-trace, positive semidefinite Hermitian operator."""

    def _checks(self) -> list[Check]:
        return operator_checks(self.matrix, self.tol, density=True)


def povm_checks(elements: Sequence[np.ndarray], tol: Tolerances = TOL, *,
                projective: bool = False) -> list[Check]:
    """Per-invariant residuals of a candidate POVM.

    Hermiticity and PSD residuals are maxima over the elements; completeness
    is the largest entry of ``sum(M_v) - I``; projectivity is the largest
    ``|M^2 - M|_F / max(1, |M|_F)`` and orthogonality the largest
    ``|M_a M_b|_F`` over distinct pairs.
    """
    mats = [np.asarray(e, dtype=np.complex128) for e in elements]
    if not mats:
        return [Check("nonempty", np.inf, 0.0)]
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        return [Check("shape", np.inf, 0.0)]
    if not all(np.all(np.isfinite(m)) for m in mats):
        return [Check("finite", np.inf, 0.0)]
    herm = psd = 0.0
    for m in mats:
        norm = _frob(m)
        herm = max(herm, _frob(m - m.conj().T) / norm if norm > 0 else 0.0)
        lam_min = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
        psd = max(psd, -lam_min)
    complete = float(np.max(np.abs(sum(mats) - np.eye(d))))
    checks = [Check("hermiticity", herm, tol.herm), Check("psd", psd, tol.psd),
              Check("completeness", complete, tol.complete)]
    if projective:
        proj = max(_frob(m @ m - m) / max(1.0, _frob(m)) for m in mats)
        orth = max((_frob(a @ b) for i, a in enumerate(mats) for b in mats[i + 1:]), default=0.0)
        checks += [Check("projectivity", proj, tol.proj), Check("orthogonality", orth, tol.proj)]
    return checks


@dataclass(frozen=True, eq=False)
class Povm:
    """A finite POVM: one PSD element per outcome, summing to the identity."""

    outcomes: tuple
    elements: tuple
    tol: Tolerances = field(default=TOL, repr=False)

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        if len(set(outcomes)) != len(outcomes):
            raise ValidationError("distinct_outcomes", len(outcomes) - len(set(outcomes)), 0.0)
        elements = tuple(e if isinstance(e, HermitianOperator) else HermitianOperator(e, self.tol)
                         for e in self.elements)
        if len(elements) != len(outcomes):
            raise ValidationError("outcome_count", abs(len(elements) - len(outcomes)), 0.0)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "elements", elements)
        _raise_first(povm_checks([e.matrix for e in elements], self.tol,
                                 projective=self._projective))

    _projective = False

    @property
    def dim(self) -> int:
        return self.elements[0].dim

    def __len__(self) -> int:
        return len(self.outcomes)

    def stacked(self) -> np.ndarray:
        """Elements as one ``(n_outcomes, d, d)`` array."""
        return np.stack([e.matrix for e in self.elements])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim}, outcomes={self.outcomes!r})"


@dataclass(frozen=True, eq=False, repr=False)
class ProjectivePovm(Povm):
    """A sharp measurement: every element is an orthogonal projector."""

    _projective = True


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=np.complex128)
    return np.outer(v, v.conj())


def basis_measurement(dim: int, unitary: np.ndarray | None = None,
                      assignment: Sequence[int] | None = None,
                      outcomes: Sequence[Hashable] | None = None) -> ProjectivePovm:
    """Projective measurement diagonal in the columns of ``unitary``.

    ``assignment[k]`` is the outcome index that basis vector ``k`` belongs
    to; by default each basis vector is its own outcome.
    """
    u = np.eye(dim, dtype=np.complex128) if unitary is None else np.asarray(unitary, dtype=np.complex128)
    assignment = list(range(dim)) if assignment is None else list(assignment)
    if outcomes is None:
        outcomes = tuple(range(max(assignment) + 1))
    elements = []
    for o in range(len(outcomes)):
        cols = [k for k, a in enumerate(assignment) if a == o]
        sub = u[:, cols]
        elements.append(sub @ sub.conj().T)
    return ProjectivePovm(tuple(outcomes), tuple(elements))


def tensor(a: HermitianOperator, b: HermitianOperator, *, max_dim: int = MAX_DIM) -> HermitianOperator:
    """Kronecker product ``a ⊗ b``; a density operator if both factors are."""
    d = a.dim * b.dim
    if d > max_dim:
        raise ValidationError("max_dim", d, max_dim, "tensor product dimension too large")
    out = np.kron(a.matrix, b.matrix)
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(out, a.tol)
    return HermitianOperator(out, a.tol)


def _normalize_probs(p: np.ndarray, tol: Tolerances) -> np.ndarray:
    total = float(p.sum())
    if abs(total - 1.0) > tol.prob:
        raise ValidationError("probability_mass", abs(total - 1.0), tol.prob,
                              "Born probabilities do not sum to one")
    lo = float(p.min())
    if lo < -tol.prob:
        raise ValidationError("negative_probability", -lo, tol.prob)
    p = np.clip(p, 0.0, 1.0)
    return p / p.sum()


def born_distribution(m: Povm, rho: DensityOperator) -> np.ndarray:
    """Outcome probabilities ``Re tr(M_v rho)`` in the order of ``m.outcomes``."""
    if m.dim != rho.dim:
        raise ValidationError("dimension", abs(m.dim - rho.dim), 0.0,
                              f"POVM dim {m.dim} vs state dim {rho.dim}")
    # tr(M rho) = sum_ij M_ij rho_ji
    p = np.einsum("vij,ji->v", m.stacked(), rho.matrix).real
    return _normalize_probs(p, m.tol)


def _sample_index(p: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def born_sample(m: Povm, rho: DensityOperator, rng: np.random.Generator):
    """Draw one outcome label of ``m`` measured on ``rho``."""
    return m.outcomes[_sample_index(born_distribution(m, rho), rng)]


def eig_hermitian(a: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Ascending real eigenvalues and a unitary matrix of eigenvectors."""
    mat = a.matrix
    try:
        lam, u = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    except np.linalg.LinAlgError as exc:
        raise EigenDecompositionError(str(exc)) from exc
    err = _frob(u @ np.diag(lam) @ u.conj().T - mat)
    scale = max(_frob(mat), 1.0)
    if not np.isfinite(err) or err > a.tol.eig * scale:
        raise EigenDecompositionError(f"reconstruction error {err:.3e} exceeds tolerance")
    return lam, u


@dataclass(frozen=True, eq=False)
class SharedBasis:
    """Common eigenbasis of a compatible family of projective measurements.

    ``outcome_table[k, j]`` is the index (into ``family[j].outcomes``) of the
    element of measurement ``j`` whose range contains basis column ``k``.
    """

    basis: np.ndarray
    outcome_table: np.ndarray

    def labels(self, family: Sequence[Povm]) -> list[list]:
        return [[family[j].outcomes[o] for j, o in enumerate(row)] for row in self.outcome_table]


def _fix_phases(u: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made real positive
    idx = np.argmax(np.abs(u) > np.abs(u).max(axis=0) - 1e-12, axis=0)  # first near-maximal entry
    ph = u[idx, np.arange(u.shape[1])]
    return u * (np.abs(ph) / ph)


def simultaneous_eigenbasis(family: Sequence[ProjectivePovm], tol: Tolerances = TOL) -> SharedBasis:
    """Shared eigenbasis of commuting projective measurements.

    Degenerate eigenspaces are split recursively: the first measurement
    splits the space into its outcome subspaces, each of which is then
    split by the second measurement, and so on.  Each measurement enters
    through ``sum_o o * M_o`` whose eigenvalues are the integer outcome
    indices, so cluster membership is decided by rounding.
    """
    if not family:
        raise ValueError("empty measurement family")
    d = family[0].dim
    if any(m.dim != d for m in family):
        raise ValidationError("dimension", 1.0, 0.0, "family members differ in dimension")
    for i, a in enumerate(family):
        for b in family[i + 1:]:
            for ea in a.elements:
                for eb in b.elements:
                    ma, mb = ea.matrix, eb.matrix
                    res = _frob(ma @ mb - mb @ ma)
                    bound = tol.commute * _frob(ma) * _frob(mb)
                    if res > bound:
                        raise ValidationError("compatibility", res, bound,
                                              "family contains non-commuting elements")

    blocks = [np.eye(d, dtype=np.complex128)]
    for m in family:
        label_op = np.tensordot(np.arange(len(m), dtype=float), m.stacked(), axes=1)
        split = []
        for v in blocks:
            sub = v.conj().T @ label_op @ v
            lam, w = np.linalg.eigh(0.5 * (sub + sub.conj().T))
            rounded = np.rint(lam)
            if np.max(np.abs(lam - rounded)) > 1e-6:
                raise ValidationError("ambiguous_outcome", float(np.max(np.abs(lam - rounded))), 1e-6,
                                      "eigenvalues of the outcome operator are not integral")
            vw = v @ w
            for val in np.unique(rounded):
                split.append(vw[:, rounded == val])
        blocks = split
    basis = _fix_phases(np.concatenate(blocks, axis=1))

    table = np.empty((d, len(family)), dtype=np.int64)
    for j, m in enumerate(family):
        weights = np.einsum("ik,vil,lk->kv", basis.conj(), m.stacked(), basis).real
        hit = np.abs(weights - 1.0) <= tol.diag
        miss = np.abs(weights) <= tol.diag
        bad = ~(hit | miss) | (hit.sum(axis=1, keepdims=True) != 1)
        if bad.any():
            resid = float(np.max(np.minimum(np.abs(weights), np.abs(weights - 1.0))))
            raise ValidationError("ambiguous_outcome", resid, tol.diag,
                                  f"measurement {j} is not diagonal in the recovered basis")
        table[:, j] = np.argmax(hit, axis=1)
        for e in m.elements:
            rot = basis.conj().T @ e.matrix @ basis
            off = _frob(rot - np.diag(np.diag(rot)))
            if off > tol.diag * max(1.0, _frob(e.matrix)):
                raise ValidationError("diagonality", off, tol.diag)
    basis.setflags(write=False)
    table.setflags(write=False)
    return SharedBasis(basis, table)


def operator_to_json(op: HermitianOperator | np.ndarray) -> dict:
    a = np.asarray(op.matrix if isinstance(op, HermitianOperator) else op)
    return {"dim": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json(doc: dict) -> np.ndarray:
    re = np.asarray(doc["re"], dtype=float)
    im = np.asarray(doc.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape or re.ndim != 2 or re.shape[0] != re.shape[1]:
        raise ValidationError("shape", np.inf, 0.0, "re/im blocks must be equal square matrices")
    if "dim" in doc and int(doc["dim"]) != re.shape[0]:
        raise ValidationError("dimension", abs(int(doc["dim"]) - re.shape[0]), 0.0,
                              "declared dim does not match entries")
    return re + 1j * im


def operator_from_json(doc: dict | str, *, density: bool = False) -> HermitianOperator:
    if isinstance(doc, str):
        doc = json.loads(doc)
    cls = DensityOperator if density else HermitianOperator
    return cls(matrix_from_json(doc))


def povm_to_json(m: Povm) -> dict:
    return {"outcomes": list(m.outcomes), "elements": [operator_to_json(e) for e in m.elements]}


def povm_from_json(doc: dict | str, *, projective: bool = False) -> Povm:
    if isinstance(doc, str):
        doc = json.loads(doc)
    cls = ProjectivePovm if projective else Povm
    return cls(tuple(doc["outcomes"]), tuple(matrix_from_json(e) for e in doc["elements"]))
