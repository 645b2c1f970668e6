"""Timed instruction lists with classical registers and conditional execution.

A :class:`Circuit` is a sequence of *slices*; instructions inside a slice run in
parallel and may not share a qubit.  Classical instructions (``cset``,
``cxor``, ``cflip``) manipulate the bit register so that decoders and
repeat-until-success logic can be written inside the circuit, the way the
extended-QASM programs of the experiment were.

JSON schema (``Circuit.to_json``)::

    {"n_qubits": int, "n_bits": int,
     "registers": {name: [bit, ...]},
     "slices": [[instruction, ...], ...]}

    instruction = {"kind": str, "qubits": [int], "gate": str?, "angle": float?,
                   "target": [int], "source": [int], "value": [0|1],
                   "duration": float?,
                   "condition": [{"bits": [int], "value": [0|1], "equal": bool}]?}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

GATES_1Q = {"I", "X", "Y", "Z", "H", "S", "Sdg", "T", "Tdg", "RZ"}
GATES_2Q = {"CNOT"}
# z-axis rotations are frame changes in software: no duration, no gate error
VIRTUAL_GATES = {"I", "Z", "S", "Sdg", "T", "Tdg", "RZ"}
PAULI_GATES = {"X", "Y", "Z"}
CLIFFORD_1Q = {"I", "X", "Y", "Z", "H", "S", "Sdg"}

QUANTUM_KINDS = {"prep0", "reset", "gate", "measure", "idle"}
CLASSICAL_KINDS = {"cset", "cxor", "cflip"}


@dataclass(frozen=True)
class Clause:
    bits: tuple
    value: tuple
    equal: bool = True


@dataclass(frozen=True)
class Condition:
    """Conjunction of register comparisons ``bits == value`` / ``bits != value``."""

    clauses: tuple

    @classmethod
    def eq(cls, bits: Sequence[int], value: Sequence[int]) -> "Condition":
        return cls((Clause(tuple(bits), tuple(value), True),))

    @classmethod
    def ne(cls, bits: Sequence[int], value: Sequence[int]) -> "Condition":
        return cls((Clause(tuple(bits), tuple(value), False),))

    def __and__(self, other: "Condition | None") -> "Condition":
        if other is None:
            return self
        return Condition(self.clauses + other.clauses)

    @property
    def bits(self) -> set:
        return {b for c in self.clauses for b in c.bits}

    def evaluate(self, creg: np.ndarray) -> np.ndarray:
        """Vectorised truth value over shots; ``creg`` has shape (shots, n_bits)."""
        out = np.ones(creg.shape[0], dtype=bool)
        for c in self.clauses:
            match = np.all(creg[:, list(c.bits)] == np.asarray(c.value, dtype=creg.dtype), axis=1)
            out &= match if c.equal else ~match
        return out


def _and(a: Condition | None, b: Condition | None) -> Condition | None:
    if a is None:
        return b
    return a & b


@dataclass(frozen=True)
class Instruction:
    kind: str
    qubits: tuple = ()
    gate: str | None = None
    angle: float | None = None
    target: tuple = ()
    source: tuple = ()
    value: tuple = ()
    condition: Condition | None = None
    duration: float | None = None

    @property
    def is_classical(self) -> bool:
        return self.kind in CLASSICAL_KINDS

    def with_condition(self, cond: Condition | None) -> "Instruction":
        if cond is None:
            return self
        return Instruction(self.kind, self.qubits, self.gate, self.angle, self.target,
                           self.source, self.value, _and(cond, self.condition), self.duration)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "qubits": list(self.qubits)}
        if self.gate is not None:
            d["gate"] = self.gate
        if self.angle is not None:
            d["angle"] = self.angle
        if self.target:
            d["target"] = list(self.target)
        if self.source:
            d["source"] = list(self.source)
        if self.value:
            d["value"] = list(self.value)
        if self.duration is not None:
            d["duration"] = self.duration
        if self.condition is not None:
            d["condition"] = [
                {"bits": list(c.bits), "value": list(c.value), "equal": c.equal}
                for c in self.condition.clauses
            ]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Instruction":
        cond = None
        if d.get("condition"):
            cond = Condition(tuple(
                Clause(tuple(c["bits"]), tuple(c["value"]), bool(c.get("equal", True)))
                for c in d["condition"]
            ))
        return cls(
            kind=d["kind"], qubits=tuple(d.get("qubits", ())), gate=d.get("gate"),
            angle=d.get("angle"), target=tuple(d.get("target", ())),
            source=tuple(d.get("source", ())), value=tuple(d.get("value", ())),
            condition=cond, duration=d.get("duration"),
        )


# convenience constructors

def gate(name: str, *qubits: int, angle: float | None = None) -> Instruction:
    return Instruction("gate", tuple(qubits), gate=name, angle=angle)


def prep0(q: int) -> Instruction:
    return Instruction("prep0", (q,))


def reset(q: int) -> Instruction:
    return Instruction("reset", (q,))


def measure(q: int, bit: int) -> Instruction:
    return Instruction("measure", (q,), target=(bit,))


def idle(q: int, duration: float) -> Instruction:
    return Instruction("idle", (q,), duration=duration)


def cset(bits: Sequence[int], value: Sequence[int]) -> Instruction:
    return Instruction("cset", target=tuple(bits), value=tuple(value))


def cxor(dst: Sequence[int], src: Sequence[int]) -> Instruction:
    return Instruction("cxor", target=tuple(dst), source=tuple(src))


def cflip(bits: Sequence[int]) -> Instruction:
    return Instruction("cflip", target=tuple(bits))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    n_bits: int
    slices: tuple
    registers: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def instructions(self) -> Iterable[Instruction]:
        for sl in self.slices:
            yield from sl

    def count(self, kind: str, gate_name: str | None = None) -> int:
        return sum(1 for ins in self.instructions
                   if ins.kind == kind and (gate_name is None or ins.gate == gate_name))

    def to_json(self, **kwargs) -> str:
        return json.dumps({
            "n_qubits": self.n_qubits,
            "n_bits": self.n_bits,
            "registers": {k: list(v) for k, v in self.registers.items()},
            "slices": [[ins.to_dict() for ins in sl] for sl in self.slices],
        }, **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        d = json.loads(text)
        return cls(
            d["n_qubits"], d["n_bits"],
            tuple(tuple(Instruction.from_dict(i) for i in sl) for sl in d["slices"]),
            {k: tuple(v) for k, v in d.get("registers", {}).items()},
        )


class CircuitBuilder:
    """Mutable helper that appends slices and allocates named bit registers."""

    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.n_bits = 0
        self.slices: list = []
        self.registers: dict = {}
        self._cond_stack: list = []

    def register(self, name: str, size: int) -> tuple:
        if name in self.registers:
            raise ValueError(f"register {name!r} already allocated")
        bits = tuple(range(self.n_bits, self.n_bits + size))
        self.n_bits += size
        self.registers[name] = bits
        return bits

    @property
    def condition(self) -> Condition | None:
        cond = None
        for c in self._cond_stack:
            cond = _and(cond, c)
        return cond

    def push_condition(self, cond: Condition) -> None:
        self._cond_stack.append(cond)

    def pop_condition(self) -> None:
        self._cond_stack.pop()

    def add(self, *instructions: Instruction) -> None:
        """Append one parallel slice (empty calls are ignored)."""
        if not instructions:
            return
        cond = self.condition
        self.slices.append(tuple(ins.with_condition(cond) for ins in instructions))

    def add_serial(self, *instructions: Instruction) -> None:
        for ins in instructions:
            self.add(ins)

    def extend(self, other: Circuit, qubit_map: Sequence[int] | None = None) -> None:
        if other.n_bits:
            raise ValueError("only purely quantum sub-circuits can be inlined")
        for sl in other.slices:
            if qubit_map is None:
                self.add(*sl)
            else:
                self.add(*(Instruction(i.kind, tuple(qubit_map[q] for q in i.qubits), i.gate,
                                       i.angle, i.target, i.source, i.value, i.condition,
                                       i.duration) for i in sl))

    def build(self) -> Circuit:
        return Circuit(self.n_qubits, self.n_bits, tuple(self.slices), dict(self.registers))


def _arity(ins: Instruction) -> int | None:
    if ins.kind == "gate":
        if ins.gate in GATES_1Q:
            return 1
        if ins.gate in GATES_2Q:
            return 2
        return None
    if ins.kind in QUANTUM_KINDS:
        return 1
    return 0


def validate(c: Circuit) -> list:
    """Return every structural violation in ``c``; an empty list means valid."""
    errors = []
    written: set = set()
    for k, sl in enumerate(c.slices):
        used: set = set()
        written_here: set = set()
        for ins in sl:
            where = f"slice {k}: {ins.kind}{'/' + ins.gate if ins.gate else ''}"
            ar = _arity(ins)
            if ins.kind not in QUANTUM_KINDS | CLASSICAL_KINDS:
                errors.append(f"{where}: unknown instruction kind")
                continue
            if ar is None:
                errors.append(f"{where}: unknown gate")
            elif len(ins.qubits) != ar:
                errors.append(f"{where}: arity mismatch ({len(ins.qubits)} qubits)")
            for q in ins.qubits:
                if not 0 <= q < c.n_qubits:
                    errors.append(f"{where}: qubit {q} out of range")
                if q in used:
                    errors.append(f"{where}: qubit reuse in slice (qubit {q})")
                used.add(q)
            if ins.kind == "gate" and len(set(ins.qubits)) != len(ins.qubits):
                errors.append(f"{where}: repeated qubit in gate")
            if ins.kind == "gate" and ins.gate == "RZ":
                if ins.angle is None or not math.isfinite(ins.angle):
                    errors.append(f"{where}: RZ needs a finite angle")
            if ins.duration is not None and ins.duration < 0:
                errors.append(f"{where}: negative duration")
            if ins.kind == "measure" and len(ins.target) != 1:
                errors.append(f"{where}: measure needs exactly one target bit")
            if ins.kind == "cset" and len(ins.value) != len(ins.target):
                errors.append(f"{where}: cset value/target length mismatch")
            if ins.kind == "cxor" and len(ins.source) != len(ins.target):
                errors.append(f"{where}: cxor source/target length mismatch")
            reads = set(ins.source)
            if ins.kind in ("cxor", "cflip"):
                reads |= set(ins.target)
            if ins.condition is not None:
                for cl in ins.condition.clauses:
                    if len(cl.bits) != len(cl.value):
                        errors.append(f"{where}: condition width mismatch")
                reads |= ins.condition.bits
            for b in sorted(reads):
                if not 0 <= b < c.n_bits:
                    errors.append(f"{where}: classical bit {b} out of range")
                elif b not in written:
                    errors.append(f"{where}: unbound classical bit {b}")
            for b in ins.target:
                if not 0 <= b < c.n_bits:
                    errors.append(f"{where}: classical bit {b} out of range")
            written_here |= set(ins.target)
        written |= written_here
    return errors


@dataclass(frozen=True)
class TimingTable:
    """Durations in seconds; ``transport`` is added once per quantum slice."""

    gate1: float = 10e-6
    gate2: float = 2e-3
    measure: float = 1e-3
    reset: float = 0.5e-3
    transport: float = 0.0

    def scaled(self, factor: float) -> "TimingTable":
        return TimingTable(self.gate1 * factor, self.gate2 * factor, self.measure * factor,
                           self.reset * factor, self.transport * factor)

    def duration_of(self, ins: Instruction) -> float:
        if ins.is_classical:
            return 0.0
        if ins.duration is not None:
            return ins.duration
        if ins.kind == "gate":
            if ins.gate in GATES_2Q:
                return self.gate2
            if ins.gate in VIRTUAL_GATES:
                return 0.0
            return self.gate1
        if ins.kind == "measure":
            return self.measure
        if ins.kind in ("reset", "prep0"):
            return self.reset
        raise KeyError(f"no timing entry for {ins.kind}")


@dataclass(frozen=True)
class Schedule:
    """Per-slice wall time and per-qubit busy/idle time.

    ``slice_times = gate_times + transport_times``; a qubit's idle time in slice
    ``k`` is ``slice_times[k] - busy[k, q]``.
    """

    gate_times: np.ndarray
    transport_times: np.ndarray
    busy: np.ndarray

    @property
    def slice_times(self) -> np.ndarray:
        return self.gate_times + self.transport_times

    @property
    def idle(self) -> np.ndarray:
        return self.slice_times[:, None] - self.busy

    @property
    def total(self) -> float:
        return float(self.slice_times.sum())

    def windows(self, k: int) -> list:
        """Dephasing windows of slice ``k`` as (duration, qubit-index array) pairs.

        Each qubit gets one window per slice: the transport time plus the time
        it waits while other qubits are operated on.
        """
        wait = self.transport_times[k] + self.gate_times[k] - self.busy[k]
        return [(float(d), np.flatnonzero(wait == d)) for d in np.unique(wait[wait > 0])]


def schedule(c: Circuit, timing: TimingTable) -> Schedule:
    n = len(c.slices)
    gate_times = np.zeros(n)
    transport = np.zeros(n)
    busy = np.zeros((n, c.n_qubits))
    for k, sl in enumerate(c.slices):
        quantum = False
        for ins in sl:
            if ins.is_classical:
                continue
            quantum = True
            d = timing.duration_of(ins)
            gate_times[k] = max(gate_times[k], d)
            if ins.kind == "idle":
                continue
            for q in ins.qubits:
                busy[k, q] = max(busy[k, q], d)
        if quantum:
            transport[k] = timing.transport
    return Schedule(gate_times, transport, busy)
