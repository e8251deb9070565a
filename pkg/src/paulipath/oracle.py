"""Exact reference simulation on a dense 4^n Pauli-coefficient vector.

States and observables are real vectors indexed by base-4 Pauli codes
(axis q = qubit q, index order I, X, Y, Z).  Every primitive in scope
has a real transfer matrix, so no complex arithmetic is needed.  Sizes
are capped so validation suites stay interactive.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .circuits import (
    Circuit,
    CliffordGate,
    PauliRotation,
    clifford_forward_table,
)
from .pauli import (
    PauliString,
    PauliSum,
    ProductState,
    QubitCountMismatch,
    commutes,
    multiply,
)

MAX_STATE_QUBITS = 12
MAX_HEISENBERG_QUBITS = 8


class InfeasibleSizeError(ValueError):
    """The requested dense simulation exceeds the supported qubit count."""


@dataclass(frozen=True, eq=False)
class DensePauliVector:
    """Coefficients c with rho = sum_P c_P P / 2^n; c at the identity index is 1."""

    n: int
    coeffs: np.ndarray

    @classmethod
    def from_product_state(cls, state: ProductState) -> "DensePauliVector":
        vectors = [np.array([1.0, *r]) for r in state.bloch]
        coeffs = reduce(np.multiply.outer, vectors)
        return cls(state.n, coeffs)

    def expectation(self, observable: PauliSum) -> float:
        if observable.n != self.n:
            raise QubitCountMismatch("observable and state qubit counts differ")
        total = 0.0
        for p, c in observable.items():
            total += c * float(self.coeffs[tuple(p.code(q) for q in range(self.n))])
        return total


def _apply_matrix(tensor: np.ndarray, mat: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    k = len(axes)
    m = mat.reshape((4,) * (2 * k))
    out = np.tensordot(m, tensor, axes=(tuple(range(k, 2 * k)), axes))
    return np.moveaxis(out, tuple(range(k)), axes)


def _joint_codes(idx: int, k: int) -> tuple[int, ...]:
    return tuple((idx >> (2 * (k - 1 - i))) & 3 for i in range(k))


def _joint_index(codes) -> int:
    idx = 0
    for c in codes:
        idx = (idx << 2) | c
    return idx


def rotation_forward_ptm(generator: PauliString, angle: float) -> np.ndarray:
    """Forward PTM of exp(-i*angle/2*G) conjugation on the gate's own qubits.

    Column p expands U P_p U^dag: unchanged when [P, G] = 0, otherwise
    cos(angle)*P_p - sin(angle)*(i G P_p) with the product folded to a
    signed Pauli.
    """
    k = generator.n
    dim = 4**k
    w = np.zeros((dim, dim))
    c, s = np.cos(angle), np.sin(angle)
    for p in range(dim):
        pstr = PauliString.from_codes(_joint_codes(p, k))
        if commutes(pstr, generator):
            w[p, p] = 1.0
        else:
            w[p, p] = c
            r, m = multiply(generator, pstr)
            sign = 1.0 if (m + 1) % 4 == 0 else -1.0  # i*G*P = i^(m+1)*R, m odd
            w[_joint_index(r.codes()), p] = -s * sign
    return w


def clifford_forward_ptm(name: str) -> np.ndarray:
    table = clifford_forward_table(name)
    dim = len(table)
    w = np.zeros((dim, dim))
    for q, (p, sign) in enumerate(table):
        # table: U P_q U^dag = sign * P_p  (forward conjugation)
        w[p, q] = sign
    return w


def _noise_ptms(noise, n: int) -> list[tuple[int, np.ndarray]]:
    out = []
    for q in range(n):
        ch = noise[q]
        if ch is None or ch.is_identity:
            continue
        out.append((q, ch.forward_ptm()))
    return out


def _gate_forward(tensor: np.ndarray, gate, n: int) -> np.ndarray:
    if isinstance(gate, PauliRotation):
        if gate.angle is None:
            raise ValueError("circuit has unresolved ensemble placeholders")
        return _apply_matrix(tensor, rotation_forward_ptm(gate.generator, gate.angle), gate.support)
    if isinstance(gate, CliffordGate):
        return _apply_matrix(tensor, clifford_forward_ptm(gate.name), gate.support)
    raise ValueError("circuit has unresolved ensemble placeholders")


def evolve_state(circuit: Circuit, state: ProductState) -> DensePauliVector:
    """Apply the full noisy circuit to a product state, exactly."""
    if circuit.n > MAX_STATE_QUBITS:
        raise InfeasibleSizeError(
            f"dense state evolution supports at most {MAX_STATE_QUBITS} qubits"
        )
    if circuit.n != state.n:
        raise QubitCountMismatch("circuit and state qubit counts differ")
    tensor = DensePauliVector.from_product_state(state).coeffs
    for layer in circuit.layers:
        for gate in layer.gates:
            tensor = _gate_forward(tensor, gate, circuit.n)
        if layer.noise is not None:
            for q, ptm in _noise_ptms(layer.noise, circuit.n):
                tensor = _apply_matrix(tensor, ptm, (q,))
    if circuit.final_layer is not None:
        for gate in circuit.final_layer.gates:
            tensor = _gate_forward(tensor, gate, circuit.n)
    return DensePauliVector(circuit.n, tensor)


def simulate_exact(circuit: Circuit, state: ProductState, observable: PauliSum) -> float:
    """Ground-truth Tr[O C(rho)] with no truncation."""
    return evolve_state(circuit, state).expectation(observable)


def heisenberg_exact(circuit: Circuit, observable: PauliSum) -> PauliSum:
    """Exact adjoint evolution of an observable, as a dense-backed Pauli sum."""
    if circuit.n > MAX_HEISENBERG_QUBITS:
        raise InfeasibleSizeError(
            f"dense observable evolution supports at most {MAX_HEISENBERG_QUBITS} qubits"
        )
    if circuit.n != observable.n:
        raise QubitCountMismatch("circuit and observable qubit counts differ")
    tensor = np.zeros((4,) * circuit.n)
    for p, c in observable.items():
        tensor[tuple(p.code(q) for q in range(circuit.n))] += c

    def adjoint_gate(tensor, gate):
        if isinstance(gate, PauliRotation):
            if gate.angle is None:
                raise ValueError("circuit has unresolved ensemble placeholders")
            m = rotation_forward_ptm(gate.generator, gate.angle).T
            return _apply_matrix(tensor, m, gate.support)
        if isinstance(gate, CliffordGate):
            return _apply_matrix(tensor, clifford_forward_ptm(gate.name).T, gate.support)
        raise ValueError("circuit has unresolved ensemble placeholders")

    if circuit.final_layer is not None:
        for gate in circuit.final_layer.gates:
            tensor = adjoint_gate(tensor, gate)
    for layer in reversed(circuit.layers):
        if layer.noise is not None:
            for q, ptm in _noise_ptms(layer.noise, circuit.n):
                tensor = _apply_matrix(tensor, ptm.T, (q,))
        for gate in layer.gates:
            tensor = adjoint_gate(tensor, gate)

    flat = tensor.reshape(-1)
    terms = []
    for idx in np.flatnonzero(flat):
        codes = np.unravel_index(idx, tensor.shape)
        terms.append((PauliString.from_codes(int(c) for c in codes), float(flat[idx])))
    return PauliSum(circuit.n, terms)
