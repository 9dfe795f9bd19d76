"""Statevector simulator and the gene <-> circuit bridge.

Basis convention: index b holds qubit i in state (b >> i) & 1, so qubit 0
is the least significant bit and index 3 on 8 qubits is 00000011. Circuit
strings follow operator-composition order: the first token is the outermost
(last-applied) gate, matching how the gene coding region reads.

Gates carry either a fixed angle in radians or a slot index into a
parameter vector; only Ry allocates slots. P is the phase gate diag(1,
e^{i*lambda}) with lambda = pi/2 by default (the S gate), overridable per
gate table.
"""

from __future__ import annotations

import math
import re
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from gepcirc.engine import ConfigError, Gene, PrimitiveSet, decode, make_gene

MAX_QUBITS = 24        # dense statevectors above this exhaust memory
TWO_TURNS = 4.0 * math.pi   # Ry period on the SU(2) double cover

__all__ = [
    "MAX_QUBITS",
    "GateKind", "GATE_KINDS", "GateInstance", "QuantumCircuit",
    "StateVector", "basis_state", "gate_matrix",
    "apply_gate", "apply_circuit", "apply_circuit_array",
    "GateTable", "build_primitive_set", "gene_to_circuit", "circuit_to_gene",
    "bind_params", "canonicalize",
    "format_angle", "parse_angle", "circuit_to_string", "parse_circuit",
    "parse_basis_label",
]


@dataclass(frozen=True)
class GateKind:
    name: str
    n_qubits: int
    n_slots: int


GATE_KINDS: dict[str, GateKind] = {
    "H": GateKind("H", 1, 0),
    "X": GateKind("X", 1, 0),
    "Y": GateKind("Y", 1, 0),
    "Z": GateKind("Z", 1, 0),
    "P": GateKind("P", 1, 0),
    "Ry": GateKind("Ry", 1, 1),
    "CNOT": GateKind("CNOT", 2, 0),
}

# self-inverse kinds cancel as adjacent identical pairs (P does not: P^2 = Z)
_SELF_INVERSE = {"H", "X", "Y", "Z", "CNOT"}

_SQRT_HALF = 1.0 / math.sqrt(2.0)
_FIXED_MATRICES = {
    "H": np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]],
                  dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    # first qubit of the pair is the control
    "CNOT": np.array([[1, 0, 0, 0],
                      [0, 1, 0, 0],
                      [0, 0, 0, 1],
                      [0, 0, 1, 0]], dtype=complex),
}


@dataclass(frozen=True)
class GateInstance:
    """A gate bound to qubits, with either a fixed angle or a slot index."""

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None
    slot: int | None = None

    def __post_init__(self) -> None:
        if len(self.qubits) != self.kind.n_qubits:
            raise ConfigError(
                f"{self.kind.name} takes {self.kind.n_qubits} qubits, "
                f"got {self.qubits}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise ConfigError(f"{self.kind.name} qubits must be distinct")
        if self.angle is not None and self.slot is not None:
            raise ConfigError("gate cannot have both a fixed angle and a slot")
        if self.kind.n_slots:
            if self.angle is None and self.slot is None:
                raise ConfigError(f"{self.kind.name} needs an angle or a slot")
        elif self.slot is not None:
            raise ConfigError(f"{self.kind.name} takes no parameter slot")
        elif self.angle is not None and self.kind.name != "P":
            raise ConfigError(f"{self.kind.name} takes no angle")

    def resolved_angle(self, params: Sequence[float]) -> float | None:
        if self.slot is not None:
            if self.slot >= len(params):
                raise ConfigError(
                    f"slot {self.slot} outside parameter vector of "
                    f"length {len(params)}"
                )
            return float(params[self.slot])
        return self.angle


@dataclass(frozen=True)
class QuantumCircuit:
    """Ordered gate list applied left-to-right to a state.

    ``n_params`` is K, the number of free parameter slots; slot indices must
    cover 0..K-1 without gaps.
    """

    n_bits: int
    gates: tuple[GateInstance, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.n_bits <= MAX_QUBITS:
            raise ConfigError(f"n_bits must be in 1..{MAX_QUBITS}")
        slots = []
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_bits:
                    raise ConfigError(
                        f"qubit {q} out of range for {self.n_bits} bits"
                    )
            if g.slot is not None:
                slots.append(g.slot)
        if sorted(set(slots)) != list(range(len(set(slots)))):
            raise ConfigError(f"parameter slots {sorted(set(slots))} have gaps")
        object.__setattr__(self, "n_params", len(set(slots)))

    def __len__(self) -> int:
        return len(self.gates)


@dataclass(frozen=True)
class StateVector:
    """Dense amplitudes over the computational basis; always unit norm."""

    n_bits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if not 1 <= self.n_bits <= MAX_QUBITS:
            raise ConfigError(f"n_bits must be in 1..{MAX_QUBITS}")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_bits,):
            raise ConfigError(
                f"expected {1 << self.n_bits} amplitudes, got {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)
        norm = float(np.linalg.norm(amps))
        assert abs(norm - 1.0) < 1e-10, f"state norm {norm} drifted from 1"

    def fidelity(self, other: "StateVector") -> float:
        """|<self|other>|^2, the global-phase-blind overlap."""
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


def basis_state(n_bits: int, index: int) -> StateVector:
    """Computational basis state |index>."""
    if not 1 <= n_bits <= MAX_QUBITS:
        raise ConfigError(f"n_bits must be in 1..{MAX_QUBITS}")
    if not 0 <= index < (1 << n_bits):
        raise ConfigError(f"basis index {index} out of range for {n_bits} bits")
    amps = np.zeros(1 << n_bits, dtype=complex)
    amps[index] = 1.0
    return StateVector(n_bits, amps)


def gate_matrix(kind: GateKind | str, angle: float | None = None) -> np.ndarray:
    """Unitary matrix of a gate kind; angle required for Ry, optional for P."""
    name = kind.name if isinstance(kind, GateKind) else kind
    if name == "Ry":
        if angle is None:
            raise ConfigError("Ry requires an angle")
        c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if name == "P":
        lam = math.pi / 2.0 if angle is None else angle
        return np.array([[1.0, 0.0], [0.0, complex(math.cos(lam), math.sin(lam))]])
    if angle is not None:
        raise ConfigError(f"{name} takes no angle")
    try:
        return _FIXED_MATRICES[name].copy()
    except KeyError:
        raise ConfigError(f"unknown gate kind {name!r}") from None


def _apply_1q(amps: np.ndarray, n_bits: int, mat: np.ndarray, q: int) -> np.ndarray:
    t = amps.reshape([2] * n_bits)
    ax = n_bits - 1 - q      # axis 0 of the tensor is the highest qubit
    t = np.moveaxis(t, ax, 0)
    shape = t.shape
    t = (mat @ t.reshape(2, -1)).reshape(shape)
    return np.moveaxis(t, 0, ax).reshape(-1)


def _apply_2q(amps: np.ndarray, n_bits: int, mat: np.ndarray,
              qa: int, qb: int) -> np.ndarray:
    t = amps.reshape([2] * n_bits)
    axa, axb = n_bits - 1 - qa, n_bits - 1 - qb
    t = np.moveaxis(t, (axa, axb), (0, 1))
    shape = t.shape
    # row index of the 4x4 is 2*b_first + b_second
    t = (mat @ t.reshape(4, -1)).reshape(shape)
    return np.moveaxis(t, (0, 1), (axa, axb)).reshape(-1)


def _apply_instance(amps: np.ndarray, n_bits: int, gate: GateInstance,
                    params: Sequence[float]) -> np.ndarray:
    mat = gate_matrix(gate.kind, gate.resolved_angle(params))
    if gate.kind.n_qubits == 1:
        return _apply_1q(amps, n_bits, mat, gate.qubits[0])
    return _apply_2q(amps, n_bits, mat, gate.qubits[0], gate.qubits[1])


def apply_gate(state: StateVector, gate: GateInstance,
               params: Sequence[float] = ()) -> StateVector:
    """Apply one gate; unitarity keeps the norm within tolerance."""
    for q in gate.qubits:
        if not 0 <= q < state.n_bits:
            raise ConfigError(f"qubit {q} out of range for {state.n_bits} bits")
    return StateVector(
        state.n_bits, _apply_instance(state.amplitudes, state.n_bits, gate, params)
    )


def apply_circuit_array(amps: np.ndarray, n_bits: int, circuit: QuantumCircuit,
                        params: Sequence[float] = ()) -> np.ndarray:
    """Hot-path variant working on raw amplitude arrays."""
    if circuit.n_bits != n_bits:
        raise ConfigError(
            f"circuit is for {circuit.n_bits} bits, state has {n_bits}"
        )
    if len(params) < circuit.n_params:
        raise ConfigError(
            f"circuit needs {circuit.n_params} parameters, got {len(params)}"
        )
    for gate in circuit.gates:
        amps = _apply_instance(amps, n_bits, gate, params)
    return amps


def apply_circuit(state: StateVector, circuit: QuantumCircuit,
                  params: Sequence[float] = ()) -> StateVector:
    """Apply all gates in order: gates[0] acts first."""
    amps = apply_circuit_array(state.amplitudes, state.n_bits, circuit, params)
    return StateVector(state.n_bits, amps)


# ---------------------------------------------------------------------------
# Gene <-> circuit bridge
# ---------------------------------------------------------------------------

class GateTable:
    """Concrete gate instances as GEP primitives.

    Every placement of every requested kind becomes one unary function
    symbol: N placements per single-qubit kind, N*(N-1) ordered pairs per
    two-qubit kind. The single terminal is the input state psi0.
    """

    def __init__(self, n_bits: int, kinds: Sequence[GateKind | str],
                 p_phase: float = math.pi / 2.0):
        if not 1 <= n_bits <= MAX_QUBITS:
            raise ConfigError(f"n_bits must be in 1..{MAX_QUBITS}")
        self.n_bits = n_bits
        self.p_phase = float(p_phase)
        self.kinds = tuple(
            GATE_KINDS[k] if isinstance(k, str) else k for k in kinds
        )
        placements: list[tuple[GateKind, tuple[int, ...]]] = []
        for kind in self.kinds:
            if kind.n_qubits == 1:
                placements += [(kind, (q,)) for q in range(n_bits)]
            else:
                placements += [
                    (kind, (a, b))
                    for a in range(n_bits) for b in range(n_bits) if a != b
                ]
        self.placements = tuple(placements)
        self.terminal = len(placements)
        # symbol names match circuit tokens: "H3", "Ry0", "CNOT0,1"
        names = {
            s: f"{kind.name}{qubits[0]}" + (f",{qubits[1]}" if len(qubits) > 1 else "")
            for s, (kind, qubits) in enumerate(placements)
        }
        names[self.terminal] = "psi0"
        self.pset = PrimitiveSet(
            [(s, 1) for s in range(len(placements))], [self.terminal], names
        )
        self._index = {pl: s for s, pl in enumerate(placements)}

    def symbol_for(self, kind: GateKind | str, qubits: Sequence[int]) -> int:
        kind = GATE_KINDS[kind] if isinstance(kind, str) else kind
        try:
            return self._index[(kind, tuple(qubits))]
        except KeyError:
            raise ConfigError(
                f"no symbol for {kind.name} on {tuple(qubits)}"
            ) from None

    def instance(self, symbol: int, slot: int | None) -> GateInstance:
        kind, qubits = self.placements[symbol]
        if kind.n_slots:
            return GateInstance(kind, qubits, slot=slot)
        if kind.name == "P":
            return GateInstance(kind, qubits, angle=self.p_phase)
        return GateInstance(kind, qubits)


def build_primitive_set(n_bits: int, kinds: Sequence[GateKind | str],
                        p_phase: float = math.pi / 2.0) -> GateTable:
    """Gate table (primitive set plus placement index) for an N-bit register."""
    return GateTable(n_bits, kinds, p_phase)


def gene_to_circuit(gene: Gene, table: GateTable) -> QuantumCircuit:
    """Decode the coding region into a circuit.

    The string is outermost-first, so gates apply in reverse symbol order;
    parameter slots are numbered in application order.
    """
    tree = decode(gene)
    symbols = tree.bfs_symbols()   # a unary chain ending in the terminal
    gates: list[GateInstance] = []
    slot = 0
    for sym in reversed(symbols[:-1]):
        inst_slot = None
        if table.placements[sym][0].n_slots:
            inst_slot = slot
            slot += 1
        gates.append(table.instance(sym, inst_slot))
    return QuantumCircuit(table.n_bits, tuple(gates))


def circuit_to_gene(circuit: QuantumCircuit, table: GateTable,
                    head_len: int) -> Gene:
    """Re-encode a slot-parametrized circuit as a gene (inverse of decode).

    Fixed Ry angles are not representable as symbols; only circuits whose Ry
    gates all carry slots (as produced by gene_to_circuit) can round-trip.
    """
    if len(circuit.gates) > head_len:
        raise ConfigError(
            f"{len(circuit.gates)} gates do not fit a head of {head_len}"
        )
    symbols: list[int] = []
    for gate in reversed(circuit.gates):
        if gate.kind.n_slots and gate.slot is None:
            raise ConfigError("cannot encode a fixed-angle Ry as a gene symbol")
        if gate.kind.name == "P" and gate.angle != table.p_phase:
            raise ConfigError("cannot encode a P gate with a non-default phase")
        symbols.append(table.symbol_for(gate.kind, gate.qubits))
    pad = head_len + 1 - len(symbols)
    symbols += [table.terminal] * pad
    return make_gene(symbols, head_len, table.pset)


def bind_params(circuit: QuantumCircuit, params: Sequence[float]) -> QuantumCircuit:
    """Substitute slot values, producing a fully fixed-angle circuit."""
    if len(params) < circuit.n_params:
        raise ConfigError(
            f"circuit needs {circuit.n_params} parameters, got {len(params)}"
        )
    gates = []
    for g in circuit.gates:
        if g.slot is not None:
            gates.append(GateInstance(g.kind, g.qubits, angle=float(params[g.slot])))
        else:
            gates.append(g)
    return QuantumCircuit(circuit.n_bits, tuple(gates))


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------

def _sort_key(gate: GateInstance) -> tuple[int, int]:
    return (min(gate.qubits), max(gate.qubits))


def _disjoint(a: GateInstance, b: GateInstance) -> bool:
    return not set(a.qubits) & set(b.qubits)


def _same_gate(a: GateInstance, b: GateInstance) -> bool:
    return (a.kind.name == b.kind.name and a.qubits == b.qubits
            and a.angle == b.angle and a.slot == b.slot)


def _fuse_ry(a: GateInstance, b: GateInstance) -> GateInstance | None:
    """Combine two adjacent Ry on one qubit; None when they cancel exactly.

    A slot anywhere in the pair absorbs the other angle: the sum of a free
    parameter with anything is still a single free parameter.
    """
    if a.slot is not None or b.slot is not None:
        slot = a.slot if a.slot is not None else b.slot
        return GateInstance(a.kind, a.qubits, slot=slot)
    total = math.fmod(a.angle + b.angle, TWO_TURNS)
    if total < 0.0:
        total += TWO_TURNS
    if total == 0.0:
        return None
    return GateInstance(a.kind, a.qubits, angle=total)


def _renumber_slots(gates: list[GateInstance]) -> list[GateInstance]:
    out: list[GateInstance] = []
    slot = 0
    for g in gates:
        if g.slot is not None:
            out.append(GateInstance(g.kind, g.qubits, slot=slot))
            slot += 1
        else:
            out.append(g)
    return out


def canonicalize(circuit: QuantumCircuit) -> QuantumCircuit:
    """Normal form preserving the output state up to global phase.

    Three rewrites run to a fixed point: adjacent gates with disjoint qubit
    support are bubble-sorted by (min qubit, max qubit); adjacent identical
    self-inverse gates on identical qubits cancel; adjacent Ry on the same
    qubit fuse by angle addition mod 4*pi. Surviving slots are renumbered in
    application order.
    """
    gates = list(circuit.gates)
    changed = True
    while changed:
        changed = False
        # bubble pass: each swap removes one inversion, so this terminates
        for i in range(len(gates) - 1):
            a, b = gates[i], gates[i + 1]
            if _disjoint(a, b) and _sort_key(b) < _sort_key(a):
                gates[i], gates[i + 1] = b, a
                changed = True
        i = 0
        while i < len(gates) - 1:
            a, b = gates[i], gates[i + 1]
            if a.kind.name in _SELF_INVERSE and _same_gate(a, b):
                del gates[i:i + 2]
                changed = True
                i = max(i - 1, 0)
            elif a.kind.name == "Ry" and b.kind.name == "Ry" and a.qubits == b.qubits:
                fused = _fuse_ry(a, b)
                gates[i:i + 2] = [] if fused is None else [fused]
                changed = True
                i = max(i - 1, 0)
            else:
                i += 1
    return QuantumCircuit(circuit.n_bits, tuple(_renumber_slots(gates)))


# ---------------------------------------------------------------------------
# Circuit string grammar
# ---------------------------------------------------------------------------

_ANGLE_SNAP = 1e-9
_TOKEN_RE = re.compile(r"^(Ry|CNOT|H|X|Y|Z|P)(\d+)(?:,(\d+))?(?::(\S+))?$")
_PI_FRACTION_RE = re.compile(r"^(-)?(\d+)?pi(?:/(\d+))?$")


def format_angle(angle: float) -> str:
    """Angle as a reduced fraction of pi when near a multiple of pi/4."""
    a = math.fmod(angle, TWO_TURNS)
    if a < 0.0:
        a += TWO_TURNS
    k = round(a / (math.pi / 4.0))
    if abs(a - k * (math.pi / 4.0)) <= _ANGLE_SNAP:
        frac = Fraction(int(k), 4)
        if frac == 0:
            return "0"
        num = "pi" if frac.numerator == 1 else f"{frac.numerator}pi"
        return num if frac.denominator == 1 else f"{num}/{frac.denominator}"
    return repr(a)


def parse_angle(text: str) -> float | int | None:
    """Angle text -> radians, or a slot index for `phi<k>` tokens."""
    if text.startswith("phi"):
        try:
            return int(text[3:])
        except ValueError:
            raise ConfigError(f"bad slot reference {text!r}") from None
    m = _PI_FRACTION_RE.match(text)
    if m:
        sign = -1.0 if m.group(1) else 1.0
        num = int(m.group(2)) if m.group(2) else 1
        den = int(m.group(3)) if m.group(3) else 1
        if den == 0:
            raise ConfigError(f"zero denominator in angle {text!r}")
        return sign * num * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse angle {text!r}") from None


def _format_gate(gate: GateInstance) -> str:
    token = gate.kind.name + ",".join(str(q) for q in gate.qubits)
    if gate.slot is not None:
        return f"{token}:phi{gate.slot}"
    if gate.kind.name == "Ry":
        return f"{token}:{format_angle(gate.angle)}"
    if gate.kind.name == "P" and gate.angle != math.pi / 2.0:
        return f"{token}:{format_angle(gate.angle)}"
    return token


def circuit_to_string(circuit: QuantumCircuit) -> str:
    """Whitespace-joined gate tokens, e.g. "Ry0:3pi/2 CNOT0,1 H2"."""
    return " ".join(_format_gate(g) for g in circuit.gates)


def parse_circuit(text: str, n_bits: int) -> QuantumCircuit:
    """Inverse of circuit_to_string; errors name the offending token."""
    gates: list[GateInstance] = []
    for pos, token in enumerate(text.split()):
        m = _TOKEN_RE.match(token)
        if not m:
            raise ConfigError(f"token {pos} ({token!r}): not a gate token")
        name, qa, qb, angle_text = m.groups()
        kind = GATE_KINDS[name]
        qubits = (int(qa),) if qb is None else (int(qa), int(qb))
        if len(qubits) != kind.n_qubits:
            raise ConfigError(
                f"token {pos} ({token!r}): {name} takes {kind.n_qubits} qubits"
            )
        angle: float | None = None
        slot: int | None = None
        if angle_text is not None:
            if not kind.n_slots and name != "P":
                raise ConfigError(
                    f"token {pos} ({token!r}): {name} takes no angle"
                )
            parsed = parse_angle(angle_text)
            if isinstance(parsed, int):
                if not kind.n_slots:
                    raise ConfigError(
                        f"token {pos} ({token!r}): {name} takes no slot"
                    )
                slot = parsed
            else:
                angle = parsed
        elif name == "P":
            angle = math.pi / 2.0
        elif kind.n_slots:
            raise ConfigError(f"token {pos} ({token!r}): Ry needs an angle")
        try:
            gates.append(GateInstance(kind, qubits, angle=angle, slot=slot))
        except ConfigError as exc:
            raise ConfigError(f"token {pos} ({token!r}): {exc}") from None
    try:
        return QuantumCircuit(n_bits, tuple(gates))
    except ConfigError as exc:
        raise ConfigError(f"circuit {text!r}: {exc}") from None


def parse_basis_label(text: str, n_bits: int) -> int:
    """Initial-state label -> basis index.

    A string of exactly n_bits 0/1 characters is a bitstring (leftmost
    character is the highest qubit); anything else must be a decimal index.
    """
    text = text.strip()
    if len(text) == n_bits and set(text) <= {"0", "1"}:
        return int(text, 2)
    try:
        index = int(text)
    except ValueError:
        raise ConfigError(f"cannot parse initial state {text!r}") from None
    if not 0 <= index < (1 << n_bits):
        raise ConfigError(
            f"initial state {index} out of range for {n_bits} bits"
        )
    return index
