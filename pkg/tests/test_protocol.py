import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftqec.backends import DenseBackend
from ftqec.circuit import validate
from ftqec.code import steane_code
from ftqec.ftcheck import inject_all, injection_sites
from ftqec.noise import Fault, NoiseModel, noiseless
from ftqec.pauli import PauliString, pauli_mul
from ftqec.protocol import (BAD_SYNDROMES, INIT_STATES, NATURAL_BASIS, BuildOptions,
                            ExperimentConfig, _Builder, decoder_2d, decoder_flag_update,
                            encode_tstate, expected_bit, expected_result, logical_meas,
                            magic_state_error, memory_circuit, prep_tstate, replay_cycle_logic,
                            run_memory_experiment, run_sgate_experiment, sgate_circuit)
from ftqec.runtime import Executor, run_batch

XZ_STATES = ("|0>", "|1>", "|+>", "|->")


# ---------------------------------------------------------------- classical decoding

@pytest.mark.parametrize("diff, want", [((0, 1, 0), 1), ((0, 0, 0), 0), ((1, 0, 0), 0),
                                        ((0, 1, 1), 1), ((0, 0, 1), 1), ((1, 1, 1), 0)])
def test_decoder_2d(diff, want):
    assert decoder_2d(diff) == want


def test_decoder_2d_marks_errors_on_logical_support():
    # a single error on qubit q changes the syndrome by column q of the check matrix;
    # the decoder must flip exactly when q carries the weight-3 logical
    code = steane_code()
    for q in range(7):
        assert decoder_2d(code.syndrome_of([q])) == int(q in code.logical_support)


@pytest.mark.parametrize("syn, flag, want", [((0, 1, 0), (1, 0, 0), 1), ((0, 0, 1), (1, 0, 0), 1),
                                             ((0, 0, 1), (0, 1, 1), 1), ((0, 1, 0), (0, 1, 1), 0)])
def test_decoder_flag_update(syn, flag, want):
    assert decoder_flag_update(syn, flag) == want


@given(st.tuples(*[st.integers(0, 1)] * 3))
def test_no_flags_means_no_flag_update(syn):
    assert decoder_flag_update(syn, (0, 0, 0)) == 0


@pytest.mark.parametrize("m, want", [((0,) * 7, 0), ((0, 0, 0, 0, 1, 0, 0), 0),
                                     ((0, 0, 1, 0, 0, 0, 0), 0), ((0, 0, 0, 0, 1, 1, 1), 1)])
def test_logical_meas_examples(m, want):
    assert logical_meas(m, "Z", (0, 0, 0), (0, 0, 0), (0, 0)) == want


@settings(max_examples=100)
@given(st.sampled_from("XYZ"), st.lists(st.integers(0, 1), min_size=7, max_size=7),
       st.integers(0, 6))
def test_logical_meas_corrects_any_single_flip(basis, word, q):
    # flipping one readout bit of any codeword leaves the decoded value unchanged
    code = steane_code()
    cw = np.array(word, dtype=np.uint8)
    rows = np.array([[1 if i in p else 0 for i in range(7)] for p in code.plaquettes])
    syn = rows @ cw % 2
    # move onto a codeword: cancel the parities with the unique single flip producing them
    for j in range(7):
        if tuple(rows[:, j]) == tuple(syn):
            cw[j] ^= 1
            break
    base = logical_meas(cw, basis, (0, 0, 0), (0, 0, 0), (0, 0))
    noisy = cw.copy()
    noisy[q] ^= 1
    assert logical_meas(noisy, basis, (0, 0, 0), (0, 0, 0), (0, 0)) == base


def test_logical_meas_is_vectorised():
    rng = np.random.default_rng(0)
    m = rng.integers(0, 2, (50, 7))
    lx = rng.integers(0, 2, (50, 3))
    lz = rng.integers(0, 2, (50, 3))
    pf = rng.integers(0, 2, (50, 2))
    out = logical_meas(m, "Y", lx, lz, pf)
    for i in range(50):
        assert out[i] == logical_meas(m[i], "Y", lx[i], lz[i], pf[i])


def test_expected_result():
    assert expected_result(0, "|0>", "Z") == 1
    assert expected_result(1, "|1>", "Z") == 1
    assert expected_result(0, "|-i>", "Y") == 0
    assert expected_bit("|->", "X") == 1
    with pytest.raises(ValueError):
        expected_result(0, "|0>", "X")


# ---------------------------------------------------------------- noiseless protocol

@pytest.mark.parametrize("state", INIT_STATES)
@pytest.mark.parametrize("backend", ["tableau", "frame"])
def test_noiseless_memory_is_exact(state, backend):
    for cycles in (0, 1, 3):
        r = run_memory_experiment(ExperimentConfig(state, None, cycles, 64, backend, noiseless(), 3))
        assert r.failures == 0 and r.unflagged_runs == 0


@pytest.mark.parametrize("state", ["|1>", "|+i>"])
def test_noiseless_memory_dense(state):
    r = run_memory_experiment(ExperimentConfig(state, None, 1, 8, "dense", noiseless(), 3))
    assert r.failures == 0


def test_one_state_in_z_basis_reads_one():
    c = memory_circuit("|1>", 0)
    res = run_batch(c, noiseless(), 32, 1, "tableau")
    out = logical_meas(res.reg("data"), "Z", res.reg("last_x"), res.reg("last_z"), res.reg("pf"))
    assert np.all(out == 1)


@pytest.mark.parametrize("active", [True, False])
def test_noiseless_sgate_has_unit_fidelity(active):
    r = run_sgate_experiment(ExperimentConfig("|+>", None, 0, 64, "frame", noiseless(), 0,
                                              active_correction=active))
    assert r.fidelity == 1.0


def _frame_slice(c):
    # the unconditional flip of the frame bits that follows the first cycle
    pf = set(c.registers["pf"])
    return next(k for k, sl in enumerate(c.slices)
                if any(i.kind == "cflip" and i.condition is None and set(i.target) <= pf
                       for i in sl))


@pytest.mark.parametrize("active", [True, False])
@pytest.mark.parametrize("pauli, frame", [("XXX", (1, 0)), ("ZZZ", (0, 1)), ("YYY", (1, 1))])
def test_tracked_logical_error_survives_the_s_gate(active, pauli, frame):
    # a logical Pauli that sits in the frame is either undone physically or carried
    # through S by the frame rotation; the Y readout must come out right either way
    c = sgate_circuit(active, forced_frame=frame)
    err = Fault(_frame_slice(c), (4, 5, 6), "pauli", pauli)
    res = run_batch(c, noiseless(), 16, 0, "tableau", faults=[err])
    out = logical_meas(res.reg("data"), "Y", res.reg("last_x"), res.reg("last_z"), res.reg("pf"))
    assert np.all(out == 0)


def test_frame_without_rotation_would_fail():
    # control for the test above: an X error tracked as X (not Y) misreads Y
    c = sgate_circuit(False, forced_frame=(1, 0))
    k = _frame_slice(c)
    res = run_batch(c, noiseless(), 4, 0, "tableau", faults=[Fault(k, (4, 5, 6), "pauli", "XXX")])
    pf = res.reg("pf").copy()
    pf[:, 1] ^= pf[:, 0]          # undo the rotation
    out = logical_meas(res.reg("data"), "Y", res.reg("last_x"), res.reg("last_z"), pf)
    assert np.all(out == 1)


# ---------------------------------------------------------------- magic state

def _tstate_vector():
    b = _Builder(BuildOptions())
    encode_tstate(b)
    c = b.build()
    be = DenseBackend(c.n_qubits, 1, np.random.default_rng(0))
    Executor(c, noiseless(), be, 1, np.random.default_rng(1)).run()
    return be.psi[0]


def test_tstate_encoder_is_exact():
    psi = _tstate_vector()
    code = steane_code()
    pad = lambda p: PauliString(p.xbits + (0,) * 3, p.zbits + (0,) * 3, p.phase)
    ev = lambda p: float(np.vdot(psi, pad(p).to_matrix() @ psi).real)
    for g in code.stabilizers:
        assert ev(g) == pytest.approx(1.0, abs=1e-10)
    xz = pauli_mul(code.logical_x, code.logical_z)
    y = PauliString(xz.xbits, xz.zbits, (xz.phase + 1) % 4)      # Y = i X Z
    assert (ev(code.logical_x) + ev(y)) / math.sqrt(2) == pytest.approx(1.0, abs=1e-10)


def test_noiseless_magic_state_statistics():
    res = prep_tstate(ExperimentConfig("|0>", None, 0, 8000, "dense", noiseless(), 9))
    ex = 1 - 2 * res.x.error_rate
    ey = 1 - 2 * res.y.error_rate
    for e, s in ((ex, res.x), (ey, res.y)):
        assert abs(e - 1 / math.sqrt(2)) <= 3 * 2 * s.binomial_std + 1e-12


def test_magic_state_error_examples():
    assert magic_state_error((1, 0), (1, 0)) == 0.0            # clamped
    assert magic_state_error((5, 5), (5, 5)) == pytest.approx(0.5)
    c = 1 / math.sqrt(2)
    n = 10 ** 6
    zeros = round(n * (1 + c) / 2)
    assert magic_state_error((zeros, n - zeros), (zeros, n - zeros)) == pytest.approx(0, abs=1e-6)
    with pytest.raises(ValueError):
        magic_state_error((0, 0), (1, 1))


def test_prep_tstate_needs_dense():
    with pytest.raises(ValueError):
        prep_tstate(ExperimentConfig("|0>", None, 0, 10, "tableau", noiseless()))


# ---------------------------------------------------------------- fault tolerance

def test_single_faults_in_x_and_z_states_are_corrected():
    rep = inject_all(states=XZ_STATES)
    assert rep.ok, rep.failures[:5]
    assert rep.total > 4 * 2000


def test_injection_excludes_the_readout():
    c = memory_circuit("|+>", 1)
    sites = injection_sites(c, "X")
    last = len(c.slices) - 2
    assert max(f.slice for f in sites) < last


def _cycle_bounds(c, k):
    regs = c.registers
    start = next(j for j, sl in enumerate(c.slices)
                 if any(i.kind == "cset" and set(i.target) & set(regs[f"c{k}_fx"]) for i in sl))
    r1_meas = next(j for j, sl in enumerate(c.slices)
                   if any(i.kind == "measure" and i.target[0] in regs[f"c{k}_r1"] for i in sl))
    return start, r1_meas


def _bits(res, name):
    return tuple(int(v) for v in res.reg(name)[0])


def test_hook_faults_are_separated_by_flags():
    # every first-round two-qubit fault that needs the flag correction has a
    # single-qubit twin with the same unflagged syndrome but different flags
    found = 0
    for state, basis in (("|0>", "Z"), ("|+>", "X")):
        c = memory_circuit(state, 1)
        start, stop = _cycle_bounds(c, 0)
        twins = {}
        for q in range(7):
            for p, reg in (("X", "c0_uz"), ("Z", "c0_ux")):
                res = run_batch(c, noiseless(), 1, 0, "tableau",
                                faults=[Fault(start, (q,), "pauli", p)])
                twins[(reg, _bits(res, reg))] = res
        hooks = [f for f in injection_sites(c, basis)
                 if start <= f.slice < stop and f.origin == "g2" and any(q >= 7 for q in f.qubits)]
        for f in hooks:
            res = run_batch(c, noiseless(), 1, 0, "tableau", faults=[f])
            for u, fl in (("c0_ux", "c0_fx"), ("c0_uz", "c0_fz")):
                if not decoder_flag_update(_bits(res, u), _bits(res, fl)):
                    continue
                found += 1
                twin = twins[(u, _bits(res, u))]
                assert _bits(twin, fl) != _bits(res, fl)
                for r in (res, twin):
                    out = logical_meas(r.reg("data"), basis, r.reg("last_x"), r.reg("last_z"),
                                       r.reg("pf"))
                    assert int(np.atleast_1d(out)[0]) == expected_bit(state, basis)
    assert found > 0


@pytest.mark.parametrize("q, pauli", [(0, "X"), (4, "Z"), (6, "Y"), (2, "X")])
def test_syndrome_idempotence(q, pauli):
    # after the first cycle absorbs a data error, the next noiseless cycle is quiet
    c = memory_circuit("|0>", 2)
    start, _ = _cycle_bounds(c, 0)
    res = run_batch(c, noiseless(), 1, 0, "tableau", faults=[Fault(start, (q,), "pauli", pauli)])
    assert any(_bits(res, "c0_fx") + _bits(res, "c0_fz"))
    assert not any(_bits(res, "c1_fx") + _bits(res, "c1_fz"))
    assert not any(_bits(res, "c1_ux") + _bits(res, "c1_uz"))
    out = logical_meas(res.reg("data"), "Z", res.reg("last_x"), res.reg("last_z"), res.reg("pf"))
    assert int(np.atleast_1d(out)[0]) == 0


def test_unflagged_round_fires_at_the_measurement_error_rate():
    p = 0.02
    nm = replace(noiseless(), meas_bitflip=p)
    shots = 20000
    r = run_memory_experiment(ExperimentConfig("|0>", None, 1, shots, "frame", nm, 17))
    k = 6                       # r1 and r2 each measure three ancillas
    want = 1 - (1 - p) ** k
    assert abs(r.unflagged_runs / shots - want) <= 3 * math.sqrt(want * (1 - want) / shots)


def test_circuit_classical_logic_matches_scalar_reference():
    c = memory_circuit("|->", 1)
    nm = NoiseModel().with_scale(10.0)
    res = run_batch(c, nm, 2000, 23, "frame")
    ran_un = 0
    for i in range(res.shots):
        g = lambda n: [int(v) for v in res.reg(n)[i]]
        # at cycle 0 the stored history is all zero, so the diff registers hold raw values
        r2_ran, un, lx, lz, pf = replay_cycle_logic(g("c0_r1"), g("c0_r2"), g("c0_ux"),
                                                    g("c0_uz"), [0] * 3, [0] * 3, [0, 0])
        ran_un += un
        assert pf == g("pf")
        if un:
            assert lx == g("last_x") and lz == g("last_z")
    assert ran_un > 50


@pytest.mark.parametrize("opts", [BuildOptions(max_parallel_2q=1), BuildOptions(prep_attempts=1)])
def test_build_options_keep_circuits_valid(opts):
    for st_ in ("|0>", "|-i>"):
        c = memory_circuit(st_, 1, opts=opts)
        assert validate(c) == []
        r = run_memory_experiment(ExperimentConfig(st_, None, 1, 32, "frame", noiseless(),
                                                   options=opts))
        assert r.failures == 0


def test_bad_syndromes_are_the_logical_support_columns():
    code = steane_code()
    assert BAD_SYNDROMES == {code.syndrome_of([q]) for q in code.logical_support}
    assert set(NATURAL_BASIS[s] for s in INIT_STATES) == {"X", "Y", "Z"}
