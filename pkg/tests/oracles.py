"""Independent reference computations used as test oracles.

Nothing here calls into the eigenbasis machinery of ``qpac``; the oracles
work from explicit operator products and plain loops.
"""
import itertools

import numpy as np

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def haar(d, rng):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density_matrix(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_povm_elements(d, n_out, rng):
    """General (non-projective) POVM via S^{-1/2} A_i S^{-1/2}."""
    a = []
    for _ in range(n_out):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        a.append(g @ g.conj().T)
    lam, u = np.linalg.eigh(sum(a))
    s_inv_half = u @ np.diag(lam ** -0.5) @ u.conj().T
    return [s_inv_half @ x @ s_inv_half for x in a]


def random_projective_elements(d, n_out, rng, unitary=None):
    u = haar(d, rng) if unitary is None else unitary
    assign = rng.integers(0, n_out, size=d)
    return [u[:, assign == o] @ u[:, assign == o].conj().T for o in range(n_out)]


def loss_operators(elements, loss_table):
    """Loss observable operators by direct Kronecker expansion, keyed by loss value."""
    k = len(elements)
    ops = {}
    for y in range(k):
        ey = np.zeros((k, k))
        ey[y, y] = 1
        for y_hat in range(k):
            z = float(loss_table[y][y_hat])
            ops[z] = ops.get(z, 0) + np.kron(elements[y_hat], ey)
    return ops


def product_operator_distribution(element_sets, loss_table, rho):
    """Born distribution of the joint loss vector from explicit operator products."""
    per_pred = [loss_operators(el, loss_table) for el in element_sets]
    zs = sorted(per_pred[0])
    dist = {}
    for z in itertools.product(zs, repeat=len(per_pred)):
        op = np.eye(rho.shape[0], dtype=complex)
        for ops, zj in zip(per_pred, z):
            op = op @ ops[zj]
        dist[z] = float(np.trace(op @ rho).real)
    return dist


def classical_risk(dist, loss_table, f):
    nx, ny = dist.shape
    return sum(dist[x][y] * loss_table[y][f[x]] for x in range(nx) for y in range(ny))


def classical_erm(pairs, functions, loss_table):
    """Index of the function with the lowest empirical loss (first on ties)."""
    best, best_j = None, None
    for j, f in enumerate(functions):
        emp = sum(loss_table[y][f[x]] for x, y in pairs) / len(pairs)
        if best is None or emp < best:
            best, best_j = emp, j
    return best_j


def pauli_projective(label):
    """Two-outcome sharp measurement of a Pauli string such as 'XZ'."""
    p = PAULI[label[0]]
    for c in label[1:]:
        p = np.kron(p, PAULI[c])
    d = p.shape[0]
    return [(np.eye(d) + p) / 2, (np.eye(d) - p) / 2]


def paulis_commute(a, b):
    anti = sum(1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y)
    return anti % 2 == 0
