"""Independent dense reference: complex density matrices and Kraus channels.

Deliberately separate from the package's Pauli-coefficient oracle so the
two can cross-check each other.  Everything here is built from explicit
2x2 matrices and Kronecker products.
"""

from __future__ import annotations

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_1Q = {"I": I2, "X": X, "Y": Y, "Z": Z}

GATE_UNITARIES = {
    "I": I2,
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.diag([1, 1j]).astype(complex),
    "SDG": np.diag([1, -1j]).astype(complex),
    "X": X,
    "Y": Y,
    "Z": Z,
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def pauli_matrix(label: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for ch in label:
        out = np.kron(out, PAULI_1Q[ch])
    return out


def embed(op: np.ndarray, support: tuple[int, ...], n: int) -> np.ndarray:
    """Expand an operator on `support` (tensor order = listed order) to n qubits."""
    k = len(support)
    perm = list(support) + [q for q in range(n) if q not in support]
    full = np.kron(op, np.eye(2 ** (n - k), dtype=complex))
    t = full.reshape((2,) * (2 * n))
    inv = np.argsort(perm)
    t = np.transpose(t, axes=[*inv, *[n + i for i in inv]])
    return t.reshape(2**n, 2**n)


def rotation_unitary(generator_label: str, theta: float) -> np.ndarray:
    g = pauli_matrix(generator_label)
    dim = g.shape[0]
    return np.cos(theta / 2) * np.eye(dim) - 1j * np.sin(theta / 2) * g


def kraus_ops(kind: str, param: float) -> list[np.ndarray]:
    if kind == "amplitude_damping":
        g = param
        return [
            np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex),
            np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex),
        ]
    if kind == "dephasing":
        p = param
        return [np.sqrt(1 - p) * I2, np.sqrt(p) * Z]
    if kind == "depolarizing":
        p = param
        return [
            np.sqrt(1 - 3 * p / 4) * I2,
            np.sqrt(p / 4) * X,
            np.sqrt(p / 4) * Y,
            np.sqrt(p / 4) * Z,
        ]
    raise ValueError(kind)


def product_density(bloch: list[tuple[float, float, float]]) -> np.ndarray:
    rho = np.array([[1.0 + 0j]])
    for rx, ry, rz in bloch:
        site = 0.5 * (I2 + rx * X + ry * Y + rz * Z)
        rho = np.kron(rho, site)
    return rho


def apply_channel_site(rho: np.ndarray, kraus: list[np.ndarray], q: int, n: int) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in kraus:
        full = embed(k, (q,), n)
        out += full @ rho @ full.conj().T
    return out


def apply_unitary(rho: np.ndarray, u: np.ndarray, support: tuple[int, ...], n: int) -> np.ndarray:
    full = embed(u, tuple(support), n)
    return full @ rho @ full.conj().T


def expectation(rho: np.ndarray, observable_terms: list[tuple[str, float]]) -> float:
    total = 0.0
    for label, coeff in observable_terms:
        total += coeff * np.trace(pauli_matrix(label) @ rho).real
    return total
