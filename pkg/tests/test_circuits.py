import json

import numpy as np
import pytest

import dense_ref
from paulipath import (
    Chain,
    Circuit,
    CliffordGate,
    EnsembleSpec,
    PauliRotation,
    PauliString,
    ProductState,
    RandomSingleQubitClifford,
    Square,
    build_hva,
    build_trotter_tfim,
    make_amplitude_damping,
    sample_circuit,
    simulate_exact,
    truncate_to_last_layers,
)
from paulipath.circuits import (
    Layer,
    NotCliffordError,
    circuit_from_json,
    circuit_to_json,
    clifford_adjoint_table,
    clifford_group_1q,
    edge_coloring,
    lattice_from_json,
    lattice_to_json,
    noisy_units,
)
from paulipath.experiments import center_z


class TestCliffordTables:
    def test_hadamard_swaps_x_and_z(self):
        table = clifford_adjoint_table("H")
        # adjoint H: X<->Z, Y -> -Y
        assert table[1] == (3, 1)
        assert table[3] == (1, 1)
        assert table[2] == (2, -1)

    def test_tables_match_dense_conjugation(self):
        for name in ("H", "S", "SDG", "X", "Y", "Z", "CNOT", "CZ", "SWAP"):
            u = dense_ref.GATE_UNITARIES[name]
            k = 1 if u.shape == (2, 2) else 2
            table = clifford_adjoint_table(name)
            for p, (q, sign) in enumerate(table):
                label_p = "".join(
                    "IXYZ"[(p >> (2 * (k - 1 - i))) & 3] for i in range(k)
                )
                label_q = "".join(
                    "IXYZ"[(q >> (2 * (k - 1 - i))) & 3] for i in range(k)
                )
                lhs = u.conj().T @ dense_ref.pauli_matrix(label_p) @ u
                assert np.allclose(lhs, sign * dense_ref.pauli_matrix(label_q))

    def test_group_has_24_elements(self):
        names = clifford_group_1q()
        assert len(names) == 24
        assert len({clifford_adjoint_table(n) for n in names}) == 24

    def test_unknown_gate(self):
        with pytest.raises(NotCliffordError):
            CliffordGate("T", (0,))


class TestGateValidation:
    def test_rotation_needs_full_support(self):
        with pytest.raises(ValueError):
            PauliRotation(PauliString.from_label("XI"), (0, 1), 0.1)
        with pytest.raises(ValueError):
            PauliRotation(PauliString.from_label("X"), (0, 1), 0.1)

    def test_clifford_arity(self):
        with pytest.raises(ValueError):
            CliffordGate("H", (0, 1))
        with pytest.raises(ValueError):
            CliffordGate("CNOT", (2,))

    def test_layer_rejects_overlap(self):
        g1 = PauliRotation(PauliString.from_label("X"), (0,), 0.1)
        g2 = CliffordGate("CNOT", (0, 1))
        with pytest.raises(ValueError):
            Layer((g1, g2))

    def test_final_layer_constraints(self):
        two_q = Layer((CliffordGate("CNOT", (0, 1)),))
        with pytest.raises(ValueError):
            Circuit(2, (), final_layer=two_q)
        noisy = Layer((CliffordGate("H", (0,)),), (make_amplitude_damping(0.1),) * 2)
        with pytest.raises(ValueError):
            Circuit(2, (), final_layer=noisy)


class TestLattices:
    def test_chain_edges(self):
        assert Chain(4).edges() == [(0, 1), (1, 2), (2, 3)]
        assert Chain(4, periodic=True).edges() == [(0, 1), (1, 2), (2, 3), (0, 3)]
        assert Chain(2, periodic=True).edges() == [(0, 1)]  # wrap edge deduped

    def test_square_edges(self):
        sq = Square(2, 2)
        assert sorted(sq.edges()) == [(0, 1), (0, 2), (1, 3), (2, 3)]
        per = Square(2, 2, periodic=True)
        assert sorted(per.edges()) == [(0, 1), (0, 2), (1, 3), (2, 3)]
        big = Square(3, 3, periodic=True)
        assert len(big.edges()) == 18  # 2 * n on a torus

    def test_centers(self):
        assert Chain(6).center() == 3
        assert Square(3, 3).center() == 4
        assert Square(4, 4).center() == 10

    def test_edge_coloring_disjoint_and_complete(self):
        edges = Square(3, 3, periodic=True).edges()
        rounds = edge_coloring(edges)
        seen = []
        for rnd in rounds:
            qubits = [q for e in rnd for q in e]
            assert len(qubits) == len(set(qubits))
            seen.extend(rnd)
        assert sorted(seen) == sorted(edges)


class TestBuilders:
    def test_hva_chain2_structure(self):
        c = build_hva(Chain(2), make_amplitude_damping(0.1), 1, EnsembleSpec(0.3))
        assert c.n == 2 and len(c.layers) == 3
        rx, rz, rzz = c.layers
        assert [g.generator.label() for g in rx.gates] == ["X", "X"]
        assert [g.generator.label() for g in rz.gates] == ["Z", "Z"]
        assert [g.generator.label() for g in rzz.gates] == ["ZZ"]
        assert rzz.gates[0].support == (0, 1)
        assert all(layer.has_noise for layer in c.layers)

    def test_hva_square_splits_edge_round(self):
        c = build_hva(Square(2, 2), None, 1, EnsembleSpec(0.1))
        kinds = [len(layer.gates) for layer in c.layers]
        assert kinds[0] == 4 and kinds[1] == 4  # RX, RZ rounds
        edge_layers = c.layers[2:]
        assert len(edge_layers) == 2
        assert sum(len(l.gates) for l in edge_layers) == 4

    def test_hva_zero_blocks(self):
        c = build_hva(Chain(3), make_amplitude_damping(0.1), 0)
        assert c.layers == ()

    def test_hva_per_block_noise(self):
        c = build_hva(Chain(3), make_amplitude_damping(0.1), 2, noise_placement="per_block")
        assert c.noisy_layer_count == 2
        units, trailing = noisy_units(c)
        assert len(units) == 2 and not trailing

    def test_trotter_zero_steps(self):
        c = build_trotter_tfim(Chain(2), 3.004438, 1.0, 0.04, 0, None)
        assert c.layers == ()

    def test_trotter_accepts_critical_point_parameters(self):
        c = build_trotter_tfim(
            Square(2, 2, periodic=True), 3.004438, 1.0, 0.04, 2, make_amplitude_damping(0.1)
        )
        assert c.n == 4 and c.noisy_layer_count == 6

    def test_trotter_per_step_noise(self):
        c = build_trotter_tfim(
            Chain(2), 3.004438, 1.0, 0.04, 3, make_amplitude_damping(0.1), "per_step"
        )
        assert c.noisy_layer_count == 3

    def test_trotter_matches_dense_reference_noiseless(self):
        j_c, h, dt = 1.3, 0.7, 0.11
        c = build_trotter_tfim(Chain(2), j_c, h, dt, 1, None)
        obs = center_z(Chain(2))
        got = simulate_exact(c, ProductState.zeros(2), obs)
        rho = dense_ref.product_density([(0, 0, 1)] * 2)
        u_half = dense_ref.rotation_unitary("Z", h * dt)
        u_xx = dense_ref.rotation_unitary("XX", 2 * j_c * dt)
        for u, supp in ((u_half, (0,)), (u_half, (1,)), (u_xx, (0, 1)),
                        (u_half, (0,)), (u_half, (1,))):
            rho = dense_ref.apply_unitary(rho, u, supp, 2)
        want = dense_ref.expectation(rho, [("IZ", 1.0)])
        assert got == pytest.approx(want, abs=1e-12)

    def test_trotter_small_dt_taylor(self):
        dt = 1e-6
        c = build_trotter_tfim(Chain(2), 1.0, 1.0, dt, 1, None)
        val = simulate_exact(c, ProductState.zeros(2), center_z(Chain(2)))
        assert abs(val - 1.0) < 1e-4  # change from identity is O(dt)


class TestSampling:
    def _template(self):
        return build_hva(Chain(3), make_amplitude_damping(0.1), 2)

    def test_template_detection(self):
        assert self._template().is_template()
        assert not sample_circuit(self._template(), 1).is_template()

    def test_same_seed_identical_serialization(self):
        a = circuit_to_json(sample_circuit(self._template(), 99))
        b = circuit_to_json(sample_circuit(self._template(), 99))
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_different_seeds_differ(self):
        a = circuit_to_json(sample_circuit(self._template(), 1))
        b = circuit_to_json(sample_circuit(self._template(), 2))
        assert a != b

    def test_fixed_template_ignores_seed(self):
        fixed = build_hva(Chain(3), None, 1, EnsembleSpec(0.7))
        assert circuit_to_json(sample_circuit(fixed, 1)) == circuit_to_json(
            sample_circuit(fixed, 2)
        )

    def test_random_clifford_sampling(self):
        tmpl = Circuit(1, (Layer((RandomSingleQubitClifford(0),)),))
        got = sample_circuit(tmpl, 5)
        assert isinstance(got.layers[0].gates[0], CliffordGate)


class TestTruncateToLastLayers:
    def _noise_only(self, depth):
        ch = (make_amplitude_damping(0.1),)
        return Circuit(1, tuple(Layer((), ch) for _ in range(depth)))

    def test_full_circuit_at_j_equals_depth(self):
        c = self._noise_only(5)
        assert truncate_to_last_layers(c, 5) == c

    def test_keeps_last_units(self):
        c = self._noise_only(5)
        kept = truncate_to_last_layers(c, 2)
        assert len(kept.layers) == 3  # layers 3, 4, 5

    def test_j_zero_keeps_one_unit(self):
        c = self._noise_only(5)
        assert len(truncate_to_last_layers(c, 0).layers) == 1

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            truncate_to_last_layers(self._noise_only(3), 4)

    def test_keeps_final_layer_and_sublayers(self):
        c = build_hva(Square(2, 2), make_amplitude_damping(0.1), 2)
        kept = truncate_to_last_layers(c, 0)
        units, trailing = noisy_units(kept)
        assert len(units) == 1 and not trailing
        # the edge round keeps its noiseless sublayer
        assert len(units[0]) == 2


class TestJsonInterface:
    def test_circuit_round_trip(self):
        c = build_trotter_tfim(Chain(3), 1.5, 0.5, 0.1, 1, make_amplitude_damping(0.25))
        again = circuit_from_json(circuit_to_json(c))
        assert circuit_to_json(again) == circuit_to_json(c)

    def test_template_round_trip(self):
        c = build_hva(Chain(2), make_amplitude_damping(0.1), 1)
        obj = circuit_to_json(c)
        assert obj["layers"][0]["gates"][0]["angle"] == "uniform"
        assert circuit_from_json(obj).is_template()

    def test_per_qubit_noise_list(self):
        obj = {
            "n": 2,
            "layers": [
                {
                    "gates": [{"type": "clifford", "name": "H", "support": [0]}],
                    "noise": [{"kind": "dephasing", "param": 0.1}, None],
                }
            ],
        }
        c = circuit_from_json(obj)
        assert c.layers[0].noise[1] is None
        assert circuit_to_json(c)["layers"][0]["noise"][1] is None

    def test_final_layer(self):
        obj = {
            "n": 1,
            "layers": [],
            "final_layer": [{"type": "clifford", "name": "H", "support": [0]}],
        }
        c = circuit_from_json(obj)
        assert c.final_layer is not None
        assert circuit_to_json(c)["final_layer"][0]["name"] == "H"

    def test_lattice_round_trip(self):
        for lat in (Chain(5, True), Square(2, 3, False)):
            assert lattice_from_json(lattice_to_json(lat)) == lat


class TestDisjointnessFuzz:
    def test_builders_always_disjoint(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            rows, cols = int(rng.integers(2, 4)), int(rng.integers(2, 4))
            lat = Square(rows, cols, periodic=bool(rng.integers(2)))
            c = build_hva(lat, make_amplitude_damping(0.1), 2)
            for layer in c.layers:
                qubits = [q for g in layer.gates for q in g.support]
                assert len(qubits) == len(set(qubits))
