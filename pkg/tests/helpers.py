"""Shared generators: random noisy circuits built in two independent forms."""

from __future__ import annotations

import numpy as np

import dense_ref
from paulipath import (
    Circuit,
    CliffordGate,
    PauliRotation,
    PauliString,
    PauliSum,
    ProductState,
    make_amplitude_damping,
    make_dephasing,
    make_depolarizing,
)
from paulipath.circuits import Layer

ONE_QUBIT_CLIFFORDS = ["H", "S", "SDG", "X", "Y", "Z"]
TWO_QUBIT_CLIFFORDS = ["CNOT", "CZ", "SWAP"]
NOISE_KINDS = ["depolarizing", "dephasing", "amplitude_damping"]
_BUILDERS = {
    "depolarizing": make_depolarizing,
    "dephasing": make_dephasing,
    "amplitude_damping": make_amplitude_damping,
}


def random_noisy_circuit(rng: np.random.Generator, n_max: int = 4, depth_max: int = 6):
    """One random circuit as a Circuit plus an equivalent dense op list."""
    n = int(rng.integers(1, n_max + 1))
    depth = int(rng.integers(0, depth_max + 1))
    layers = []
    dense_ops = []
    for _ in range(depth):
        order = list(rng.permutation(n))
        gates = []
        while order:
            if len(order) >= 2 and rng.random() < 0.5:
                a, b = int(order.pop()), int(order.pop())
                if rng.random() < 0.5:
                    name = TWO_QUBIT_CLIFFORDS[rng.integers(3)]
                    gates.append(CliffordGate(name, (a, b)))
                    dense_ops.append(("u", dense_ref.GATE_UNITARIES[name], (a, b)))
                else:
                    gen = str(rng.choice(["XX", "ZZ", "XZ", "YY", "XY"]))
                    theta = float(rng.uniform(0, 2 * np.pi))
                    gates.append(PauliRotation(PauliString.from_label(gen), (a, b), theta))
                    dense_ops.append(("u", dense_ref.rotation_unitary(gen, theta), (a, b)))
            else:
                q = int(order.pop())
                if rng.random() < 0.5:
                    name = ONE_QUBIT_CLIFFORDS[rng.integers(6)]
                    gates.append(CliffordGate(name, (q,)))
                    dense_ops.append(("u", dense_ref.GATE_UNITARIES[name], (q,)))
                else:
                    gen = str(rng.choice(["X", "Y", "Z"]))
                    theta = float(rng.uniform(0, 2 * np.pi))
                    gates.append(PauliRotation(PauliString.from_label(gen), (q,), theta))
                    dense_ops.append(("u", dense_ref.rotation_unitary(gen, theta), (q,)))
        channels = []
        for q in range(n):
            kind = NOISE_KINDS[rng.integers(3)]
            param = float(rng.uniform(0.0, 0.5))
            channels.append(_BUILDERS[kind](param))
            dense_ops.append(("k", dense_ref.kraus_ops(kind, param), q))
        layers.append(Layer(tuple(gates), tuple(channels)))
    return Circuit(n, tuple(layers)), dense_ops, n


def random_observable(rng: np.random.Generator, n: int, terms: int = 3) -> PauliSum:
    pairs = []
    for _ in range(terms):
        pairs.append(
            (
                PauliString(n, int(rng.integers(1 << n)), int(rng.integers(1 << n))),
                float(rng.standard_normal()),
            )
        )
    obs = PauliSum(n, pairs)
    if not obs:
        obs = PauliSum(n, [(PauliString.single(n, 0, "Z"), 1.0)])
    return obs


def random_product_state(rng: np.random.Generator, n: int) -> ProductState:
    bloch = []
    for _ in range(n):
        v = rng.standard_normal(3)
        v = v / np.linalg.norm(v) * rng.random()
        bloch.append((float(v[0]), float(v[1]), float(v[2])))
    return ProductState.from_vectors(bloch)


def dense_expectation(dense_ops, n: int, state: ProductState, obs: PauliSum) -> float:
    rho = dense_ref.product_density(list(state.bloch))
    for kind, payload, where in dense_ops:
        if kind == "u":
            rho = dense_ref.apply_unitary(rho, payload, where, n)
        else:
            rho = dense_ref.apply_channel_site(rho, payload, where, n)
    terms = [(p.label(), c) for p, c in obs.items()]
    return dense_ref.expectation(rho, terms)
