"""Brute-force verifiers, independent of the fast expectation machinery.

The Ising/MaxCut oracles enumerate every spin assignment with plain bit
arithmetic; the quantum oracle builds the dense Hamiltonian matrix from
explicit Kronecker products and diagonalizes it. Nothing here shares code
with the permutation-based expectation path, so agreement between the two
is meaningful evidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gepcirc.engine import ConfigError
from gepcirc.hamiltonians import Graph, PauliSumHamiltonian

ENUM_CAP = 24        # 2^24 spin configurations is the practical limit
DENSE_CAP = 10       # 2^10 x 2^10 complex matrix = 16 MB

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

__all__ = [
    "ENUM_CAP", "DENSE_CAP", "OracleResult",
    "exhaustive_ising_ground", "brute_force_maxcut",
    "dense_matrix", "exact_ground_energy",
]


@dataclass(frozen=True)
class OracleResult:
    """Minimum energy plus every basis index that attains it."""

    ground_energy: float
    minimizers: tuple[int, ...]

    @property
    def degeneracy(self) -> int:
        return len(self.minimizers)


def _spin_energies(graph: Graph) -> np.ndarray:
    """Sum of S_i*S_j over edges for every assignment, S = 1 - 2*bit."""
    idx = np.arange(1 << graph.n, dtype=np.int64)
    energies = np.zeros(1 << graph.n, dtype=np.int32)
    for i, j in graph.edges:
        s_i = 1 - 2 * ((idx >> i) & 1)
        s_j = 1 - 2 * ((idx >> j) & 1)
        energies += (s_i * s_j).astype(np.int32)
    return energies


def exhaustive_ising_ground(graph: Graph) -> OracleResult:
    """Full enumeration of the classical Ising energy over 2^n states."""
    if graph.n > ENUM_CAP:
        raise ConfigError(f"{graph.n} vertices exceeds enumeration cap {ENUM_CAP}")
    energies = _spin_energies(graph)
    emin = int(energies.min())
    minimizers = tuple(int(b) for b in np.nonzero(energies == emin)[0])
    return OracleResult(float(emin), minimizers)


def brute_force_maxcut(graph: Graph) -> tuple[int, tuple[int, ...]]:
    """Maximum cut value and every bipartition (as a basis index) reaching it."""
    if graph.n > ENUM_CAP:
        raise ConfigError(f"{graph.n} vertices exceeds enumeration cap {ENUM_CAP}")
    idx = np.arange(1 << graph.n, dtype=np.int64)
    cuts = np.zeros(1 << graph.n, dtype=np.int32)
    for i, j in graph.edges:
        cuts += (((idx >> i) ^ (idx >> j)) & 1).astype(np.int32)
    best = int(cuts.max())
    winners = tuple(int(b) for b in np.nonzero(cuts == best)[0])
    return best, winners


def dense_matrix(h: PauliSumHamiltonian) -> np.ndarray:
    """Dense matrix of the raw Hamiltonian (no shift/scale) via Kronecker products."""
    if h.n_bits > DENSE_CAP:
        raise ConfigError(f"{h.n_bits} qubits exceeds dense cap {DENSE_CAP}")
    dim = 1 << h.n_bits
    total = np.zeros((dim, dim), dtype=complex)
    for term in h.terms:
        paulis = term.paulis
        mat = np.eye(1, dtype=complex)
        # qubit 0 is the least significant bit, so it is the last kron factor
        for q in range(h.n_bits - 1, -1, -1):
            mat = np.kron(mat, _PAULI_1Q[paulis.get(q, "I")])
        total += term.coefficient * mat
    return total


def exact_ground_energy(h: PauliSumHamiltonian) -> float:
    """Minimum eigenvalue of s*(H - e0), by dense symmetric diagonalization."""
    eigs = np.linalg.eigvalsh(dense_matrix(h))
    return float(np.min(h.scale * (eigs - h.shift)))
