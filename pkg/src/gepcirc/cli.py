"""Command line driver: input-file parsing, runs, and oracle cross-checks.

Input files are one `Key = value` per line with `#` comments. Relative
paths inside the file resolve against the file's directory, and artifacts
(trace.csv, best.circ, maxcut.txt) are written there too. Exit status 0
means the run completed all generations; EXIT_EARLY_STOP means the fitness
target was reached first.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from gepcirc import __version__
from gepcirc.engine import (
    ConfigError,
    EvolutionConfig,
    EvolutionResult,
    Gene,
    run_evolution,
)
from gepcirc.fitness import (
    CachingFitness,
    OptimizerSettings,
    Problem,
    function_fit_problem,
    ground_state_problem,
)
from gepcirc.hamiltonians import (
    Graph,
    PauliSumHamiltonian,
    heisenberg_2d,
    ising_from_graph,
    load_graph,
    load_pauli_sum,
    maxcut_from_state,
    xx_chain,
)
from gepcirc.oracle import (
    DENSE_CAP,
    ENUM_CAP,
    brute_force_maxcut,
    exact_ground_energy,
    exhaustive_ising_ground,
)
from gepcirc.sim import (
    GATE_KINDS,
    GateInstance,
    QuantumCircuit,
    StateVector,
    apply_circuit,
    basis_state,
    bind_params,
    build_primitive_set,
    canonicalize,
    circuit_to_gene,
    circuit_to_string,
    gene_to_circuit,
    parse_basis_label,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EARLY_STOP = 3

TOP_K = 5

__all__ = [
    "EXIT_OK", "EXIT_ERROR", "EXIT_EARLY_STOP",
    "RunSpec", "parse_input", "run", "VerifyReport", "verify",
    "decode_gene_string", "main",
]


@dataclass
class RunSpec:
    """Everything a run needs, as parsed from one input file."""

    run_type: str
    n_bits: int
    gates: tuple[str, ...]
    head_size: int
    generations: int
    population: int = 100
    seed: int = 0
    early_stop: float | None = None
    initial_state: str | None = None
    graph_file: str | None = None
    hamiltonian: str | None = None
    training_pairs: str | None = None
    canonicalize: bool = False
    gradient_refine: bool = False
    energy_shift: float = 0.0
    energy_scale: float = 1.0
    threads: int = 1
    epsilon: float = 1e-4
    mutation_rate: float = 0.05
    one_point_rate: float = 0.4
    two_point_rate: float = 0.2
    inversion_rate: float = 0.1
    swap_rate: float = 0.1
    exact_energy: float | None = None
    p_phase: float = math.pi / 2.0
    base_dir: Path = Path(".")

    def resolve(self, path: str) -> Path:
        return self.base_dir / path


def _parse_bool(text: str) -> bool:
    if text in ("0", "1"):
        return text == "1"
    raise ValueError("expected 0 or 1")


def _parse_gates(text: str) -> tuple[str, ...]:
    gates = tuple(g.strip() for g in text.split(","))
    for g in gates:
        if g not in GATE_KINDS:
            raise ValueError(
                f"unknown gate {g!r} (choose from {', '.join(sorted(GATE_KINDS))})"
            )
    if len(set(gates)) != len(gates):
        raise ValueError("duplicate gate kind")
    return gates


# key -> (RunSpec attribute, converter)
_KEYS = {
    "RunType": ("run_type", str),
    "NumBits": ("n_bits", int),
    "Gates": ("gates", _parse_gates),
    "HeadSize": ("head_size", int),
    "Population": ("population", int),
    "Generations": ("generations", int),
    "Seed": ("seed", int),
    "EarlyStopFitness": ("early_stop", float),
    "InitialState": ("initial_state", str),
    "GraphFile": ("graph_file", str),
    "Hamiltonian": ("hamiltonian", str),
    "TrainingPairs": ("training_pairs", str),
    "Canonicalize": ("canonicalize", _parse_bool),
    "GradientRefine": ("gradient_refine", _parse_bool),
    "EnergyShift": ("energy_shift", float),
    "EnergyScale": ("energy_scale", float),
    "Threads": ("threads", int),
    "Epsilon": ("epsilon", float),
    "MutationRate": ("mutation_rate", float),
    "OnePointRate": ("one_point_rate", float),
    "TwoPointRate": ("two_point_rate", float),
    "InversionRate": ("inversion_rate", float),
    "SwapRate": ("swap_rate", float),
    "ExactEnergy": ("exact_energy", float),
    "PPhase": ("p_phase", float),
}

_REQUIRED = ("RunType", "NumBits", "Gates", "HeadSize", "Generations")


def parse_input(path: str | Path) -> RunSpec:
    """Read a `Key = value` file into a validated RunSpec."""
    path = Path(path)
    values: dict[str, object] = {}
    seen: dict[str, int] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected Key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in seen:
                raise ConfigError(
                    f"{path}:{lineno}: key {key} already set on line {seen[key]}"
                )
            seen[key] = lineno
            attr, convert = _KEYS[key]
            try:
                values[attr] = convert(value)
            except ValueError as exc:
                raise ConfigError(
                    f"{path}:{lineno}: bad value for {key}: {exc}"
                ) from None
    for key in _REQUIRED:
        if _KEYS[key][0] not in values:
            raise ConfigError(f"{path}: missing required key {key}")
    spec = RunSpec(base_dir=path.parent, **values)
    _validate_spec(spec, path)
    return spec


def _validate_spec(spec: RunSpec, path: Path) -> None:
    if spec.run_type not in ("FunctionFit", "GroundState"):
        raise ConfigError(
            f"{path}: RunType must be FunctionFit or GroundState, "
            f"got {spec.run_type!r}"
        )
    if spec.threads < 1:
        raise ConfigError(f"{path}: Threads must be >= 1")
    if spec.epsilon < 0:
        raise ConfigError(f"{path}: Epsilon must be >= 0")
    if spec.run_type == "FunctionFit":
        if spec.training_pairs is None:
            raise ConfigError(f"{path}: FunctionFit requires TrainingPairs")
        if spec.graph_file or spec.hamiltonian:
            raise ConfigError(
                f"{path}: FunctionFit takes no GraphFile or Hamiltonian"
            )
    else:
        sources = [s for s in (spec.graph_file, spec.hamiltonian) if s]
        if len(sources) != 1:
            raise ConfigError(
                f"{path}: GroundState requires exactly one of "
                f"GraphFile or Hamiltonian"
            )
        if spec.training_pairs:
            raise ConfigError(f"{path}: GroundState takes no TrainingPairs")


def _hamiltonian_from_key(value: str, n_bits: int,
                          spec: RunSpec) -> PauliSumHamiltonian:
    kind, _, rest = value.partition(":")
    if kind == "xx":
        parts = rest.split(",")
        if len(parts) != 3:
            raise ConfigError(
                f"Hamiltonian=xx takes n,Jx,open|periodic, got {value!r}"
            )
        try:
            n, jx = int(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigError(f"bad xx parameters in {value!r}") from None
        h = xx_chain(n, jx, parts[2])
    elif kind == "heisenberg2d":
        parts = rest.split(",")
        if len(parts) != 2:
            raise ConfigError(
                f"Hamiltonian=heisenberg2d takes rows,cols, got {value!r}"
            )
        try:
            h = heisenberg_2d(int(parts[0]), int(parts[1]))
        except ValueError:
            raise ConfigError(f"bad heisenberg2d parameters in {value!r}") from None
    elif kind == "file":
        h = load_pauli_sum(str(spec.resolve(rest)))
    else:
        raise ConfigError(
            f"Hamiltonian must be xx:..., heisenberg2d:... or file:..., "
            f"got {value!r}"
        )
    if h.n_bits != n_bits:
        raise ConfigError(
            f"Hamiltonian is on {h.n_bits} bits but NumBits = {n_bits}"
        )
    return h


def load_training_pairs(path: str | Path, n_bits: int
                        ) -> list[tuple[StateVector, StateVector]]:
    """Pairs file: one `input output` of basis labels per line; `->` allowed."""
    pairs = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace("->", " ").split()
            if len(parts) != 2:
                raise ConfigError(
                    f"{path}:{lineno}: expected 'input output' labels"
                )
            try:
                idx_in = parse_basis_label(parts[0], n_bits)
                idx_out = parse_basis_label(parts[1], n_bits)
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
            pairs.append((basis_state(n_bits, idx_in), basis_state(n_bits, idx_out)))
    if not pairs:
        raise ConfigError(f"{path}: no training pairs")
    return pairs


@dataclass
class _Prepared:
    problem: Problem
    graph: Graph | None
    reference: float | None     # ground energy of the optimized Hamiltonian
    config: EvolutionConfig
    canonicalize_gene: Callable[[Gene], Gene] | None


def _reference_energy(spec: RunSpec, h: PauliSumHamiltonian,
                      graph: Graph | None) -> float | None:
    """Exact ground energy for the delta columns, when obtainable."""
    if h.n_bits <= DENSE_CAP:
        return exact_ground_energy(h)
    if graph is not None and graph.n <= ENUM_CAP and spec.energy_scale >= 0:
        raw = exhaustive_ising_ground(graph).ground_energy
        return spec.energy_scale * (raw - spec.energy_shift)
    return spec.exact_energy


def _prepare(spec: RunSpec) -> _Prepared:
    table = build_primitive_set(spec.n_bits, spec.gates, p_phase=spec.p_phase)
    settings = OptimizerSettings(refine=spec.gradient_refine)
    graph = None
    reference = None
    if spec.run_type == "FunctionFit":
        if spec.initial_state is not None:
            raise ConfigError("FunctionFit takes inputs from TrainingPairs, "
                              "not InitialState")
        pairs = load_training_pairs(spec.resolve(spec.training_pairs), spec.n_bits)
        problem = function_fit_problem(table, pairs, settings)
    else:
        if spec.graph_file:
            graph = load_graph(str(spec.resolve(spec.graph_file)))
            if graph.n != spec.n_bits:
                raise ConfigError(
                    f"graph has {graph.n} vertices but NumBits = {spec.n_bits}"
                )
            h = ising_from_graph(graph)
        else:
            h = _hamiltonian_from_key(spec.hamiltonian, spec.n_bits, spec)
        if spec.energy_shift != 0.0 or spec.energy_scale != 1.0:
            h = h.rescaled(spec.energy_shift, spec.energy_scale)
        index = 0
        if spec.initial_state is not None:
            index = parse_basis_label(spec.initial_state, spec.n_bits)
        problem = ground_state_problem(table, h, basis_state(spec.n_bits, index),
                                       settings)
        reference = _reference_energy(spec, h, graph)
    config = EvolutionConfig(
        generations=spec.generations,
        head_len=spec.head_size,
        population_size=spec.population,
        seed=spec.seed,
        early_stop_fitness=spec.early_stop,
        mutation_rate=spec.mutation_rate,
        one_point_prob=spec.one_point_rate,
        two_point_prob=spec.two_point_rate,
        inversion_prob=spec.inversion_rate,
        swap_prob=spec.swap_rate,
    )
    hook = None
    if spec.canonicalize:
        def hook(gene: Gene) -> Gene:
            circ = canonicalize(gene_to_circuit(gene, table))
            return circuit_to_gene(circ, table, spec.head_size)
    return _Prepared(problem, graph, reference, config, hook)


def _execute(spec: RunSpec) -> tuple[EvolutionResult, CachingFitness, _Prepared]:
    prep = _prepare(spec)
    cache = CachingFitness(prep.problem)
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            result = run_evolution(
                prep.config, prep.problem.table.pset, cache,
                canonicalize=prep.canonicalize_gene, evaluator=pool.map,
            )
    else:
        result = run_evolution(
            prep.config, prep.problem.table.pset, cache,
            canonicalize=prep.canonicalize_gene,
        )
    return result, cache, prep


def _write_trace(path: Path, result: EvolutionResult,
                 reference: float | None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("generation,best_fitness,worst_fitness,delta_e_best,delta_e_pop\n")
        for st in result.stats:
            if reference is not None:
                d_best = repr(-st.best_fitness - reference)
                d_pop = repr(-st.worst_fitness - reference)
            else:
                d_best = d_pop = ""
            fh.write(
                f"{st.generation},{st.best_fitness!r},{st.worst_fitness!r},"
                f"{d_best},{d_pop}\n"
            )


def _write_best(path: Path, result: EvolutionResult, cache: CachingFitness,
                prep: _Prepared) -> None:
    """Top circuits with their fitness, angles bound to the optimal values."""
    lines = []
    seen = set()
    for gene, fit in zip(result.population, result.fitnesses):
        circuit = gene_to_circuit(gene, prep.problem.table)
        if prep.problem.canonicalize_circuits:
            circuit = canonicalize(circuit)
        text = circuit_to_string(bind_params(circuit, cache.params_for(gene)))
        if text in seen:
            continue
        seen.add(text)
        lines.append(f"{fit!r}\t{text}\n")
        if len(lines) == TOP_K:
            break
    with open(path, "w") as fh:
        fh.writelines(lines)


def _final_state(result: EvolutionResult, cache: CachingFitness,
                 prep: _Prepared) -> StateVector:
    gene = result.best_gene
    circuit = gene_to_circuit(gene, prep.problem.table)
    if prep.problem.canonicalize_circuits:
        circuit = canonicalize(circuit)
    state = StateVector(prep.problem.n_bits, prep.problem.initial)
    return apply_circuit(state, circuit, cache.params_for(gene))


def _write_maxcut(path: Path, spec: RunSpec, result: EvolutionResult,
                  cache: CachingFitness, prep: _Prepared) -> None:
    state = _final_state(result, cache, prep)
    candidates = maxcut_from_state(state, prep.graph, spec.epsilon)
    with open(path, "w") as fh:
        fh.write("# bitstring weight cut side_a side_b\n")
        for c in candidates:
            a = ",".join(map(str, c.side_a)) or "-"
            b = ",".join(map(str, c.side_b)) or "-"
            fh.write(f"{c.bitstring} {c.weight!r} {c.cut} {a} {b}\n")


def run(spec: RunSpec) -> int:
    """Full pipeline: evolve, then write trace.csv, best.circ, maxcut.txt."""
    result, cache, prep = _execute(spec)
    out = spec.base_dir
    _write_trace(out / "trace.csv", result, prep.reference)
    _write_best(out / "best.circ", result, cache, prep)
    if prep.graph is not None:
        _write_maxcut(out / "maxcut.txt", spec, result, cache, prep)
    print(
        f"generations {len(result.stats)} best_fitness {result.best_fitness!r}"
        + (" (early stop)" if result.early_stopped else "")
    )
    return EXIT_EARLY_STOP if result.early_stopped else EXIT_OK


@dataclass
class VerifyReport:
    oracle_energy: float
    best_fitness: float
    gap: float                 # best achieved energy minus exact ground energy
    maxcut: int | None = None
    early_stopped: bool = False

    def lines(self) -> list[str]:
        out = [
            f"oracle ground energy: {self.oracle_energy!r}",
            f"best fitness: {self.best_fitness!r}",
            f"gap: {self.gap!r}",
        ]
        if self.maxcut is not None:
            out.append(f"oracle maxcut: {self.maxcut}")
        return out


def verify(spec: RunSpec) -> VerifyReport:
    """Run the evolution and compare against the exact oracle answer."""
    if spec.run_type != "GroundState":
        raise ConfigError("verify requires a GroundState run")
    result, cache, prep = _execute(spec)
    if prep.reference is None:
        raise ConfigError(
            f"no oracle available: NumBits > {DENSE_CAP} and no graph "
            f"within {ENUM_CAP} vertices"
        )
    gap = -result.best_fitness - prep.reference
    maxcut = None
    if prep.graph is not None:
        maxcut = brute_force_maxcut(prep.graph)[0]
    return VerifyReport(prep.reference, result.best_fitness, gap, maxcut,
                        result.early_stopped)


_GENE_TOKEN_RE = re.compile(r"^(Ry|CNOT|H|X|Y|Z|P)(\d+)(?:,(\d+))?$")


def decode_gene_string(text: str) -> QuantumCircuit:
    """Genome tokens -> the circuit they encode.

    Tokens before the first `psi0` are the coding gates (outermost first);
    the register width is inferred from the largest qubit index.
    """
    tokens = text.split()
    if "psi0" in tokens:
        tokens = tokens[: tokens.index("psi0")]
    gates_rev = []
    max_q = 0
    for pos, token in enumerate(tokens):
        m = _GENE_TOKEN_RE.match(token)
        if not m:
            raise ConfigError(f"token {pos} ({token!r}): not a genome symbol")
        name, qa, qb = m.groups()
        qubits = (int(qa),) if qb is None else (int(qa), int(qb))
        max_q = max(max_q, *qubits)
        gates_rev.append((GATE_KINDS[name], qubits))
    gates = []
    slot = 0
    for kind, qubits in reversed(gates_rev):
        if kind.n_slots:
            gates.append(GateInstance(kind, qubits, slot=slot))
            slot += 1
        elif kind.name == "P":
            gates.append(GateInstance(kind, qubits, angle=math.pi / 2.0))
        else:
            gates.append(GateInstance(kind, qubits))
    return QuantumCircuit(max_q + 1, tuple(gates))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gepcirc",
        description="Evolve quantum circuits with gene expression programming.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="evolve and write artifacts")
    p_run.add_argument("input", help="input file of Key = value lines")
    p_verify = sub.add_parser("verify", help="run and compare with the oracle")
    p_verify.add_argument("input")
    p_decode = sub.add_parser("decode", help="print the circuit of a genome")
    p_decode.add_argument("gene", help='genome symbols, e.g. "Ry0 CNOT0,1 psi0"')
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run(parse_input(args.input))
        if args.command == "verify":
            report = verify(parse_input(args.input))
            for line in report.lines():
                print(line)
            return EXIT_OK
        print(circuit_to_string(decode_gene_string(args.gene)))
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
