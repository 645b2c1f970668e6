import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftqec.circuit import (Circuit, CircuitBuilder, Condition, TimingTable, cflip, cset, cxor,
                           gate, idle, measure, prep0, reset, schedule, validate)
from ftqec.protocol import (INIT_STATES, default_timing, memory_circuit, reference_cycle_circuit,
                            sgate_circuit, tstate_circuit)


def test_empty_circuit_is_valid():
    assert validate(Circuit(3, 0, ())) == []


def test_qubit_reuse_in_slice():
    c = Circuit(5, 0, ((gate("H", 3), gate("X", 3)),))
    assert any("qubit reuse in slice" in e for e in validate(c))


def test_unbound_classical_bit():
    b = CircuitBuilder(1)
    b.register("m", 1)
    b.push_condition(Condition.eq([0], [1]))
    b.add(gate("X", 0))
    errs = validate(b.build())
    assert any("unbound classical bit" in e for e in errs)


@pytest.mark.parametrize("bad, needle", [
    (gate("CNOT", 0), "arity mismatch"),
    (gate("FOO", 0), "unknown gate"),
    (gate("RZ", 0), "finite angle"),
    (gate("CNOT", 1, 1), "repeated qubit"),
    (gate("H", 7), "out of range"),
    (idle(0, -1.0), "negative duration"),
])
def test_structural_errors(bad, needle):
    errs = validate(Circuit(3, 0, ((bad,),)))
    assert any(needle in e for e in errs), errs


def test_measured_bit_can_condition_later_slices():
    b = CircuitBuilder(2)
    (m,) = b.register("m", 1)
    b.add(measure(0, m))
    b.push_condition(Condition.eq([m], [1]))
    b.add(gate("X", 1))
    b.pop_condition()
    b.add(cflip([m]))
    assert validate(b.build()) == []


@pytest.mark.parametrize("state", INIT_STATES)
def test_shipped_memory_circuits_validate(state):
    for cycles in (0, 1, 2):
        assert validate(memory_circuit(state, cycles)) == []


def test_other_shipped_circuits_validate():
    for c in (sgate_circuit(True), sgate_circuit(False), tstate_circuit("X"), tstate_circuit("Y", 1),
              reference_cycle_circuit()):
        assert validate(c) == []


def test_json_roundtrip_is_exact():
    c = memory_circuit("|+i>", 2)
    text = c.to_json()
    back = Circuit.from_json(text)
    assert back == c
    assert back.registers == c.registers
    assert back.to_json() == text


def test_json_schema_fields():
    b = CircuitBuilder(2)
    bits = b.register("r", 2)
    b.add(prep0(0), reset(1))
    b.add(gate("RZ", 0, angle=0.25), measure(1, bits[0]))
    b.push_condition(Condition.ne([bits[0]], [0]))
    b.add(cset([bits[1]], [1]))
    b.pop_condition()
    b.add(cxor([bits[1]], [bits[0]]))
    d = json.loads(b.build().to_json())
    assert set(d) == {"n_qubits", "n_bits", "registers", "slices"}
    assert d["registers"] == {"r": [0, 1]}
    assert d["slices"][1][0] == {"kind": "gate", "qubits": [0], "gate": "RZ", "angle": 0.25}
    assert d["slices"][2][0]["condition"] == [{"bits": [0], "value": [0], "equal": False}]
    assert Circuit.from_json(json.dumps(d)) == b.build()


def test_single_gate_schedule():
    c = Circuit(10, 0, ((gate("H", 0),),))
    s = schedule(c, TimingTable(gate1=10e-6))
    assert s.total == pytest.approx(10e-6)
    assert np.allclose(s.idle[0, 1:], 10e-6)
    assert s.idle[0, 0] == 0


def test_parallel_equal_gates_take_one_duration():
    c = Circuit(4, 0, ((gate("CNOT", 0, 1), gate("CNOT", 2, 3)),))
    s = schedule(c, TimingTable(gate2=2e-3))
    assert s.total == pytest.approx(2e-3)


def test_virtual_gates_are_free_and_transport_added_per_quantum_slice():
    c = Circuit(2, 1, ((gate("S", 0),), (measure(1, 0),), (cflip([0]),)))
    s = schedule(c, TimingTable(measure=1e-3, transport=5e-4))
    assert list(s.gate_times) == [0.0, 1e-3, 0.0]
    assert list(s.transport_times) == [5e-4, 5e-4, 0.0]


def test_windows_cover_waiting_qubits():
    c = Circuit(3, 1, ((measure(0, 0), gate("H", 1)),))
    s = schedule(c, TimingTable(gate1=1e-5, measure=1e-3, transport=1e-4))
    got = sorted((tuple(int(q) for q in qs), d) for d, qs in s.windows(0))
    assert [g[0] for g in got] == [(0,), (1,), (2,)]
    assert [g[1] for g in got] == pytest.approx([1e-4, 1e-4 + 1e-3 - 1e-5, 1.1e-3])


def test_calibrated_cycle_under_200ms():
    s = schedule(reference_cycle_circuit(), default_timing())
    assert s.total <= 0.2


@settings(max_examples=30, deadline=None)
@given(st.permutations(range(6)), st.lists(st.sampled_from(["H", "X", "CNOT", "M"]),
                                          min_size=1, max_size=6))
def test_schedule_invariant_under_qubit_relabelling(perm, kinds):
    # relabelling qubits permutes the idle matrix columns and leaves slice times alone
    def build(m):
        sl = []
        for k, name in enumerate(kinds):
            if name == "CNOT":
                sl.append((gate("CNOT", m[k % 3], m[3 + k % 3]),))
            elif name == "M":
                sl.append((measure(m[k % 6], 0),))
            else:
                sl.append((gate(name, m[k % 6]),))
        return Circuit(6, 1, tuple(sl))
    t = TimingTable(gate1=1e-5, gate2=1e-4, measure=1e-3, transport=2e-4)
    a = schedule(build(list(range(6))), t)
    b = schedule(build(list(perm)), t)
    assert np.allclose(a.slice_times, b.slice_times)
    assert np.allclose(a.idle, b.idle[:, list(perm)])


def test_timing_scaled():
    t = TimingTable(1, 2, 3, 4, 5).scaled(0.5)
    assert t == TimingTable(0.5, 1, 1.5, 2, 2.5)
