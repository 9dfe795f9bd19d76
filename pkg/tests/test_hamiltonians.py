"""Hamiltonian construction, expectation values, MaxCut readout, file formats."""

import math
import random

import numpy as np
import pytest

from gepcirc.engine import ConfigError
from gepcirc.hamiltonians import (
    Graph,
    PauliSumHamiltonian,
    PauliTerm,
    cut_value,
    expectation,
    heisenberg_2d,
    ising_from_graph,
    load_graph,
    load_pauli_sum,
    maxcut_from_state,
    save_graph,
    save_pauli_sum,
    xx_chain,
)
from gepcirc.oracle import dense_matrix
from gepcirc.sim import StateVector, basis_state, parse_circuit, apply_circuit


def rand_state(n, rng):
    amps = np.array([complex(rng.gauss(0, 1), rng.gauss(0, 1))
                     for _ in range(1 << n)])
    return StateVector(n, amps / np.linalg.norm(amps))


def rand_graph(n, rng, p=0.5):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.random() < p]
    return Graph(n, tuple(edges))


def rand_hamiltonian(n, rng, n_terms=5):
    terms = []
    for _ in range(n_terms):
        qubits = rng.sample(range(n), rng.randint(1, n))
        terms.append(PauliTerm.from_map(
            rng.uniform(-2, 2), {q: rng.choice("XYZ") for q in qubits}))
    return PauliSumHamiltonian(n, terms)


class TestGraph:
    def test_normalizes_and_validates(self):
        g = Graph(3, ((2, 0), (0, 1)))
        assert g.edges == ((0, 2), (0, 1))
        with pytest.raises(ConfigError):
            Graph(3, ((0, 0),))
        with pytest.raises(ConfigError):
            Graph(3, ((0, 3),))
        with pytest.raises(ConfigError):
            Graph(3, ((0, 1), (1, 0)))

    def test_cut_value(self):
        c4 = Graph(4, ((0, 1), (1, 2), (2, 3), (0, 3)))
        assert cut_value(c4, 0b0101) == 4
        assert cut_value(c4, 0) == 0
        assert cut_value(c4, 0b0001) == 2


class TestIsing:
    def test_edgeless_graph(self):
        h = ising_from_graph(Graph(3, ()))
        assert h.terms == ()
        assert expectation(h, basis_state(3, 5)) == 0.0

    def test_single_edge(self):
        h = ising_from_graph(Graph(2, ((0, 1),)))
        assert expectation(h, basis_state(2, 0b00)) == 1.0
        assert expectation(h, basis_state(2, 0b01)) == -1.0
        assert expectation(h, basis_state(2, 0b11)) == 1.0

    def test_energy_cut_identity(self):
        # <b|H|b> = |E| - 2*cut(b) for every basis state
        rng = random.Random(20)
        for _ in range(10):
            g = rand_graph(rng.randint(2, 7), rng)
            h = ising_from_graph(g)
            for b in range(1 << g.n):
                e = expectation(h, basis_state(g.n, b))
                assert e == len(g.edges) - 2 * cut_value(g, b)


class TestChainAndGrid:
    def test_xx_term_counts(self):
        assert len(xx_chain(4, 1.0, "periodic").terms) == 4
        assert len(xx_chain(4, 1.0, "open").terms) == 3

    def test_xx_validation(self):
        with pytest.raises(ConfigError):
            xx_chain(1, 1.0, "open")
        with pytest.raises(ConfigError):
            xx_chain(4, 1.0, "moebius")

    def test_xx_alternating_ry_reaches_exact_energy(self):
        h = xx_chain(4, 1.0, "periodic")
        circuit = parse_circuit("Ry0:3pi/2 Ry1:pi/2 Ry2:3pi/2 Ry3:pi/2", 4)
        out = apply_circuit(basis_state(4, 0), circuit)
        assert abs(expectation(h, out) - (-4.0)) < 1e-9

    def test_heisenberg_bond_counts(self):
        assert len(heisenberg_2d(1, 2).terms) == 3     # one bond, X+Y+Z
        assert len(heisenberg_2d(3, 3).terms) == 12 * 3
        assert heisenberg_2d(1, 1).terms == ()

    def test_heisenberg_row_major_bonds(self):
        h = heisenberg_2d(2, 2)
        bonds = {tuple(q for q, _ in t.ops) for t in h.terms}
        assert bonds == {(0, 1), (0, 2), (1, 3), (2, 3)}


class TestExpectation:
    def test_zero_term_hamiltonian(self):
        h = PauliSumHamiltonian(2, [])
        assert expectation(h, basis_state(2, 1)) == 0.0

    def test_matches_dense_matrix(self):
        rng = random.Random(21)
        for _ in range(50):
            n = rng.randint(1, 5)
            h = rand_hamiltonian(n, rng)
            s = rand_state(n, rng)
            dense = float(np.real(np.vdot(s.amplitudes,
                                          dense_matrix(h) @ s.amplitudes)))
            assert abs(expectation(h, s) - dense) < 1e-10

    def test_linear_and_order_invariant(self):
        rng = random.Random(22)
        h = rand_hamiltonian(4, rng, n_terms=6)
        s = rand_state(4, rng)
        base = expectation(h, s)
        shuffled = list(h.terms)
        rng.shuffle(shuffled)
        assert abs(expectation(PauliSumHamiltonian(4, shuffled), s) - base) \
            < 1e-12
        doubled = PauliSumHamiltonian(
            4, [PauliTerm(2 * t.coefficient, t.ops) for t in h.terms])
        assert abs(expectation(doubled, s) - 2 * base) < 1e-12

    def test_shift_scale(self):
        rng = random.Random(23)
        h = rand_hamiltonian(3, rng)
        s = rand_state(3, rng)
        raw = expectation(h, s)
        scaled = expectation(h.rescaled(2.5, 10.0), s)
        assert abs(scaled - 10.0 * (raw - 2.5)) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            expectation(PauliSumHamiltonian(3, []), basis_state(2, 0))

    def test_term_validation(self):
        with pytest.raises(ConfigError):
            PauliTerm.from_map(math.nan, {0: "Z"})
        with pytest.raises(ConfigError):
            PauliTerm(1.0, ((0, "Z"), (0, "X")))
        with pytest.raises(ConfigError):
            PauliTerm.from_map(1.0, {0: "W"})
        with pytest.raises(ConfigError):
            PauliSumHamiltonian(2, [PauliTerm.from_map(1.0, {5: "Z"})])


class TestMaxCutReadout:
    C8 = Graph(8, ((0, 2), (1, 2), (3, 4), (0, 7)))

    def test_single_basis_state(self):
        out = maxcut_from_state(basis_state(8, 3), self.C8, 1e-4)
        assert len(out) == 1
        cand = out[0]
        assert cand.bitstring == "00000011"
        assert cand.side_a == (0, 1)
        assert cand.side_b == (2, 3, 4, 5, 6, 7)
        assert cand.cut == cut_value(self.C8, 3)

    def test_threshold_filters_everything(self):
        g = Graph(3, ((0, 1),))
        uniform = StateVector(3, np.full(8, math.sqrt(1 / 8)))
        assert maxcut_from_state(uniform, g, epsilon=1.0) == []

    def test_superposition_reports_both(self):
        g = Graph(3, ((0, 1), (1, 2)))
        amps = np.zeros(8, dtype=complex)
        amps[3] = amps[7] = math.sqrt(0.5)
        out = maxcut_from_state(StateVector(3, amps), g, 1e-4)
        assert [c.index for c in out] == [3, 7]

    def test_sorted_by_weight(self):
        g = Graph(2, ((0, 1),))
        amps = np.array([0.6, 0.0, 0.0, 0.8], dtype=complex)
        out = maxcut_from_state(StateVector(2, amps), g, 1e-4)
        assert [c.index for c in out] == [3, 0]
        assert out[0].weight > out[1].weight


class TestFileFormats:
    def test_pauli_golden(self, tmp_path):
        path = tmp_path / "edge.ham"
        path.write_text("nbits 2\n1.0 Z0 Z1\n")
        h = load_pauli_sum(str(path))
        assert h.n_bits == 2
        assert h.terms == (PauliTerm.from_map(1.0, {0: "Z", 1: "Z"}),)

    def test_pauli_round_trip(self, tmp_path):
        rng = random.Random(24)
        for i in range(20):
            h = rand_hamiltonian(rng.randint(1, 5), rng)
            path = tmp_path / f"h{i}.ham"
            save_pauli_sum(h, str(path))
            back = load_pauli_sum(str(path))
            assert back.n_bits == h.n_bits
            assert back.terms == h.terms

    def test_pauli_comments_and_constants(self, tmp_path):
        path = tmp_path / "c.ham"
        path.write_text("# a constant plus a field\nnbits 1\n-0.5\n1.25 X0\n")
        h = load_pauli_sum(str(path))
        assert len(h.terms) == 2
        assert h.terms[0].ops == ()

    def test_pauli_errors_carry_line_numbers(self, tmp_path):
        path = tmp_path / "bad.ham"
        path.write_text("nbits 2\n1.0 Q0\n")
        with pytest.raises(ConfigError, match="bad.ham:2"):
            load_pauli_sum(str(path))
        path.write_text("2 qubits\n")
        with pytest.raises(ConfigError, match="bad.ham:1"):
            load_pauli_sum(str(path))
        path.write_text("nbits 2\n1.0 Z0 Z0\n")
        with pytest.raises(ConfigError, match="bad.ham:2"):
            load_pauli_sum(str(path))

    def test_graph_round_trip(self, tmp_path):
        g = Graph(5, ((0, 1), (2, 4), (1, 3)))
        path = tmp_path / "g.graph"
        save_graph(g, str(path))
        assert load_graph(str(path)) == g

    def test_graph_errors(self, tmp_path):
        path = tmp_path / "bad.graph"
        path.write_text("vertices 3\n")
        with pytest.raises(ConfigError, match="bad.graph:1"):
            load_graph(str(path))
        path.write_text("n 3\n0 1 2\n")
        with pytest.raises(ConfigError, match="bad.graph:2"):
            load_graph(str(path))
        path.write_text("n 3\n0 5\n")
        with pytest.raises(ConfigError):
            load_graph(str(path))
