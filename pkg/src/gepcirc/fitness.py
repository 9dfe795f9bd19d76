"""Pre-fitness functionals, parameter optimization, and problem binding.

A circuit's fitness is the maximum of its pre-fitness over the continuous
gate angles: overlap-squared with target states averaged over training
pairs (FunctionFit), or minus the Hamiltonian expectation (GroundState).
The optimizer is a deterministic coordinate sweep over a discrete angle
grid, optionally followed by gradient ascent with central finite
differences.

The sweep starts from all angles at pi/4 rather than 0: for product-state
problems the all-zero point is a stationary saddle where no single-angle
change moves the pre-fitness, so a sweep seeded there cannot leave it.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from gepcirc.engine import ConfigError, Gene
from gepcirc.hamiltonians import PauliSumHamiltonian
from gepcirc.sim import (
    GateTable,
    QuantumCircuit,
    StateVector,
    apply_circuit_array,
    basis_state,
    canonicalize,
    gene_to_circuit,
)

DEFAULT_GRID = tuple(k * (math.pi / 4.0) for k in range(8))

__all__ = [
    "DEFAULT_GRID", "OptimizerSettings", "Problem",
    "ground_state_problem", "function_fit_problem",
    "prefitness", "optimize_params", "fitness", "CachingFitness",
]


@dataclass(frozen=True)
class OptimizerSettings:
    """Knobs for the angle search.

    The grid defaults to the eight multiples of pi/4 in [0, 2*pi);
    ``refine`` switches on the finite-difference gradient ascent.
    """

    grid: tuple[float, ...] = DEFAULT_GRID
    refine: bool = False
    fd_step: float = 1e-4
    max_refine_iters: int = 100
    tolerance: float = 1e-8
    start_angle: float = math.pi / 4.0
    max_sweep_cycles: int = 100

    def __post_init__(self) -> None:
        if not self.grid:
            raise ConfigError("angle grid must be non-empty")
        if self.fd_step <= 0.0:
            raise ConfigError("finite-difference step must be positive")
        if self.max_refine_iters < 0 or self.max_sweep_cycles < 1:
            raise ConfigError("iteration caps out of range")


@dataclass(frozen=True)
class Problem:
    """A fitness target: training pairs or a Hamiltonian plus start state."""

    kind: str                   # "FunctionFit" or "GroundState"
    table: GateTable
    settings: OptimizerSettings = OptimizerSettings()
    pairs: tuple[tuple[np.ndarray, np.ndarray], ...] = ()
    hamiltonian: PauliSumHamiltonian | None = None
    initial: np.ndarray | None = None
    canonicalize_circuits: bool = False

    @property
    def n_bits(self) -> int:
        return self.table.n_bits


def function_fit_problem(
    table: GateTable,
    pairs: Sequence[tuple[StateVector, StateVector]],
    settings: OptimizerSettings = OptimizerSettings(),
    canonicalize_circuits: bool = False,
) -> Problem:
    """Reproduce D input -> output state mappings (D >= 1)."""
    if not pairs:
        raise ConfigError("FunctionFit needs at least one training pair")
    for s_in, s_out in pairs:
        if s_in.n_bits != table.n_bits or s_out.n_bits != table.n_bits:
            raise ConfigError(
                f"training pair on {s_in.n_bits}/{s_out.n_bits} bits, "
                f"gate table on {table.n_bits}"
            )
    raw = tuple((p.amplitudes, q.amplitudes) for p, q in pairs)
    return Problem("FunctionFit", table, settings, pairs=raw,
                   canonicalize_circuits=canonicalize_circuits)


def ground_state_problem(
    table: GateTable,
    hamiltonian: PauliSumHamiltonian,
    initial_state: StateVector | None = None,
    settings: OptimizerSettings = OptimizerSettings(),
    canonicalize_circuits: bool = False,
) -> Problem:
    """Minimize <H> over circuit outputs from one initial state."""
    if hamiltonian.n_bits != table.n_bits:
        raise ConfigError(
            f"Hamiltonian on {hamiltonian.n_bits} bits, "
            f"gate table on {table.n_bits}"
        )
    if initial_state is None:
        initial_state = basis_state(table.n_bits, 0)
    elif initial_state.n_bits != table.n_bits:
        raise ConfigError(
            f"initial state on {initial_state.n_bits} bits, "
            f"gate table on {table.n_bits}"
        )
    return Problem("GroundState", table, settings,
                   hamiltonian=hamiltonian, initial=initial_state.amplitudes,
                   canonicalize_circuits=canonicalize_circuits)


def prefitness(circuit: QuantumCircuit, params: Sequence[float],
               problem: Problem) -> float:
    """P(phi): mean squared overlap (FunctionFit) or -<H> (GroundState)."""
    n = problem.n_bits
    if problem.kind == "FunctionFit":
        total = 0.0
        for amps_in, amps_out in problem.pairs:
            evolved = apply_circuit_array(amps_in, n, circuit, params)
            total += float(abs(np.vdot(amps_out, evolved)) ** 2)
        return total / len(problem.pairs)
    evolved = apply_circuit_array(problem.initial, n, circuit, params)
    return -problem.hamiltonian.expectation_array(evolved)


def _fd_gradient(pf: Callable[[list[float]], float], phi: list[float],
                 step: float) -> list[float]:
    grad = []
    for k in range(len(phi)):
        orig = phi[k]
        phi[k] = orig + step
        up = pf(phi)
        phi[k] = orig - step
        down = pf(phi)
        phi[k] = orig
        grad.append((up - down) / (2.0 * step))
    return grad


def _gradient_refine(pf: Callable[[list[float]], float], phi: list[float],
                     best: float, settings: OptimizerSettings) -> tuple[list[float], float]:
    """Ascent with backtracking line search; stops on tolerance or cap."""
    alpha = 0.5
    for _ in range(settings.max_refine_iters):
        grad = _fd_gradient(pf, phi, settings.fd_step)
        if max(abs(g) for g in grad) < settings.tolerance:
            break
        step = alpha
        improved = False
        while step > 1e-12:
            cand = [p + step * g for p, g in zip(phi, grad)]
            value = pf(cand)
            if value > best + settings.tolerance:
                phi, best = cand, value
                alpha = min(step * 2.0, 1.0)
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return phi, best


def optimize_params(circuit: QuantumCircuit, problem: Problem,
                    settings: OptimizerSettings | None = None
                    ) -> tuple[tuple[float, ...], float]:
    """Best angle vector and its pre-fitness, deterministically.

    Coordinate-wise sweep over the grid, cycling until no single-slot
    change strictly improves, then optional gradient refinement. Always
    returns the best point seen.
    """
    if settings is None:
        settings = problem.settings
    k_slots = circuit.n_params
    if k_slots == 0:
        return (), prefitness(circuit, (), problem)

    def pf(values: Sequence[float]) -> float:
        return prefitness(circuit, values, problem)

    phi = [settings.start_angle] * k_slots
    best = pf(phi)
    for _ in range(settings.max_sweep_cycles):
        improved = False
        for k in range(k_slots):
            current = phi[k]
            slot_best, slot_angle = best, current
            for angle in settings.grid:
                if angle == current:
                    continue
                phi[k] = angle
                value = pf(phi)
                if value > slot_best:
                    slot_best, slot_angle = value, angle
            phi[k] = slot_angle
            if slot_best > best:
                best = slot_best
                improved = True
        if not improved:
            break
    if settings.refine:
        phi, best = _gradient_refine(pf, phi, best, settings)
    return tuple(phi), best


def fitness(gene: Gene, problem: Problem) -> float:
    """F = P(phi_max) for the circuit the gene decodes to."""
    circuit = gene_to_circuit(gene, problem.table)
    if problem.canonicalize_circuits:
        circuit = canonicalize(circuit)
    _, value = optimize_params(circuit, problem)
    return value


class CachingFitness:
    """Memoized fitness callable for the engine.

    Fitness is a pure function of the genome symbols, so results (and the
    optimizing angles, needed when reporting winners) are cached by symbol
    tuple. Safe under concurrent calls: worst case a value is computed
    twice.
    """

    def __init__(self, problem: Problem):
        self.problem = problem
        self._cache: dict[tuple[int, ...], tuple[float, tuple[float, ...]]] = {}

    def __call__(self, gene: Gene) -> float:
        key = gene.symbols
        hit = self._cache.get(key)
        if hit is None:
            circuit = gene_to_circuit(gene, self.problem.table)
            if self.problem.canonicalize_circuits:
                circuit = canonicalize(circuit)
            params, value = optimize_params(circuit, self.problem)
            hit = (value, params)
            self._cache[key] = hit
        return hit[0]

    def params_for(self, gene: Gene) -> tuple[float, ...]:
        """Optimizing angle vector for a genome (computing it if needed)."""
        self(gene)
        return self._cache[gene.symbols][1]
