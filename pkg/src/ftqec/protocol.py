"""The fault-tolerant memory protocol as circuits plus the classical decoding logic.

Qubits 0-6 are data (documentation numbers them 1-7), qubits 7-9 are the
syndrome ancillas.  Every experiment compiles to a single
:class:`~ftqec.circuit.Circuit`: the repeat-until-verified preparation, the
adaptive syndrome rounds and the lookup decoders are written with conditional
instructions and classical register operations, so one run of the circuit is
one complete shot.  The final destructive readout is decoded in Python by
:func:`logical_meas` (vectorised over shots).

Registers
---------
``verify``   one bit per preparation attempt (0 = verified)
``last_x``   X-type plaquette values from the most recent unflagged round
``last_z``   Z-type plaquette values from the most recent unflagged round
``pf``       logical Pauli frame ``(fx, fz)``
``cK_r1``    round-1 flagged outcomes of cycle K: (X s1, Z s2, Z s3)
``cK_r2``    round-2 flagged outcomes: (Z s1, X s2, X s3)
``cK_fx``    flag diffs of the X-type flagged measurements
``cK_fz``    flag diffs of the Z-type flagged measurements
``cK_ux``    unflagged X-type outcomes (s1, s2, s3), also reused as their diff
``cK_uz``    unflagged Z-type outcomes
``data``     final readout of the seven data qubits
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .circuit import (Circuit, CircuitBuilder, Condition, TimingTable, cflip, cset, cxor, gate,
                      measure, prep0, reset)
from .code import steane_code
from .noise import (DEFAULT_TIMING_SHAPE, DEFAULT_WINDOW_DEPHASING, NoiseModel, calibrate_timing,
                    noiseless, preset)
from .runtime import run_batch

DATA = tuple(range(7))
ANCILLAS = (7, 8, 9)
N_QUBITS = 10

INIT_STATES = ("|0>", "|1>", "|+>", "|->", "|+i>", "|-i>")
NATURAL_BASIS = {"|0>": "Z", "|1>": "Z", "|+>": "X", "|->": "X", "|+i>": "Y", "|-i>": "Y",
                 "|T>": "X"}
ZERO_OUTCOMES = {("X", "|+>"), ("Y", "|+i>"), ("Z", "|0>"), ("X", "|T>"), ("Y", "|T>")}
ONE_OUTCOMES = {("X", "|->"), ("Y", "|-i>"), ("Z", "|1>")}

BAD_SYNDROMES = {(0, 1, 0), (0, 1, 1), (0, 0, 1)}
FLAG_CASES = {((1, 0, 0), (0, 1, 0)), ((1, 0, 0), (0, 0, 1)), ((0, 1, 1), (0, 0, 1))}


# ---------------------------------------------------------------- circuit layout

@dataclass(frozen=True)
class Layout:
    """CNOT schedules (0-based data indices).

    ``flagged[i]`` lists ``(data, step)`` pairs: when ancilla ``i`` touches each
    qubit of plaquette ``i`` in both flagged rounds (the unflagged rounds reuse
    the schedule).  Steps may leave gaps; several ancillas act in parallel in
    one step if they touch different data qubits.  ``links`` are
    ``(i, j, step)`` CNOTs between ancillas ``i`` and ``j`` in the flagged
    rounds, always from the X-type ancilla to the Z-type one; they make each
    ancilla sensitive to the other ancillas' hook faults while keeping the
    outcomes deterministic.  ``fanout[p]`` are
    the targets of preparation pivot ``p``; ``verify`` is the support of the
    Z-parity checked after encoding.
    """

    flagged: tuple
    fanout: tuple     # ((pivot, (t1, t2, t3)), ...)
    verify: tuple
    links: tuple = ()

    @property
    def pivots(self) -> dict:
        return dict(self.fanout)

    @property
    def steps(self) -> int:
        return 1 + max([t for o in self.flagged for _, t in o] + [t for *_, t in self.links])

    def order(self, i: int) -> tuple:
        return tuple(d for d, _ in sorted(self.flagged[i], key=lambda x: x[1]))

    def check(self) -> None:
        code = steane_code()
        seen = set()
        for plaq, sched in zip(code.plaquettes, self.flagged):
            if sorted(d for d, _ in sched) != sorted(plaq):
                raise ValueError(f"schedule {sched} does not cover plaquette {plaq}")
            times = [t for _, t in sched]
            if len(set(times)) != len(times) or min(times) < 0:
                raise ValueError(f"schedule {sched} reuses a step")
            for d, t in sched:
                if (d, t) in seen:
                    raise ValueError(f"data qubit {d + 1} used twice in extraction step {t}")
                seen.add((d, t))
        busy = {(i, t) for i, o in enumerate(self.flagged) for _, t in o}
        for i, j, t in self.links:
            for a in (i, j):
                if (a, t) in busy:
                    raise ValueError(f"ancilla {a + 1} used twice in extraction step {t}")
                busy.add((a, t))
        steps = list(zip(*self.pivots.values()))
        for st in steps:
            if len(set(st)) != len(st):
                raise ValueError("data qubit used twice in a fan-out step")


def parse_layout(text: str) -> Layout:
    """JSON with 1-based qubit numbers: ``flagged`` (3 lists of 4 ``[qubit, step]``
    pairs, or of bare qubits for back-to-back steps), ``fanout`` (pivot -> 3
    targets in order), ``verify`` (3 qubits) and optional ``links``
    (``[i, j, step]`` ancilla-ancilla CNOTs, ancillas numbered by plaquette)."""
    d = json.loads(text)

    def timed(o):
        if all(isinstance(x, int) for x in o):
            return tuple((q - 1, t) for t, q in enumerate(o))
        return tuple((q - 1, t) for q, t in o)

    lay = Layout(
        flagged=tuple(timed(o) for o in d["flagged"]),
        fanout=tuple(sorted((int(p) - 1, tuple(q - 1 for q in t))
                            for p, t in d["fanout"].items())),
        verify=tuple(q - 1 for q in d["verify"]),
        links=tuple((i - 1, j - 1, t) for i, j, t in d.get("links", ())),
    )
    lay.check()
    return lay


def load_layout(path: str | Path | None = None) -> Layout:
    if path is None:
        return default_layout()
    return parse_layout(Path(path).read_text())


@lru_cache(maxsize=1)
def default_layout() -> Layout:
    return parse_layout(resources.files("ftqec.data").joinpath("layout.json").read_text())


@dataclass(frozen=True)
class BuildOptions:
    """Structural knobs of the compiled circuits.

    ``max_parallel_2q`` caps the CNOTs per slice (``None`` = no cap; serial
    sub-slices are emitted otherwise).  ``prep_attempts`` is the number of
    encode-and-verify attempts.
    """

    layout: Layout | None = None
    max_parallel_2q: int | None = None
    prep_attempts: int = 3

    @property
    def lay(self) -> Layout:
        return self.layout or default_layout()


class _Builder(CircuitBuilder):
    def __init__(self, opts: BuildOptions):
        super().__init__(N_QUBITS)
        self.opts = opts

    def cnots(self, pairs):
        cap = self.opts.max_parallel_2q or len(pairs)
        for i in range(0, len(pairs), cap):
            self.add(*(gate("CNOT", a, b) for a, b in pairs[i:i + cap]))

    def classical(self, *ins):
        for i in ins:
            self.add(i)


# ---------------------------------------------------------------- building blocks

def logical_x(b: CircuitBuilder) -> None:
    b.add(*(gate("X", q) for q in steane_code().logical_support))


def logical_z(b: CircuitBuilder) -> None:
    b.add(*(gate("Z", q) for q in steane_code().logical_support))


def logical_h(b: CircuitBuilder) -> None:
    b.add(*(gate("H", q) for q in DATA))


def logical_s(b: CircuitBuilder) -> None:
    # the transversal S-dagger layer acts as the logical S for these logical operators
    b.add(*(gate("Sdg", q) for q in DATA))


def logical_sdg(b: CircuitBuilder) -> None:
    b.add(*(gate("S", q) for q in DATA))


def encode_zero(b: _Builder, first: bool) -> None:
    """Non-verified |0>_L encoder: pivots in |+>, then three fan-out steps."""
    lay = b.opts.lay
    init = prep0 if first else reset
    b.add(*(init(q) for q in DATA + (ANCILLAS[0],)))
    fan = lay.pivots
    b.add(*(gate("H", p) for p in fan))
    for t in range(3):
        b.cnots([(p, fan[p][t]) for p in sorted(fan)])


def ftprep_zero(b: _Builder) -> None:
    """Encode, check the Z-parity on ``layout.verify`` with one ancilla, and retry
    on a nontrivial outcome; proceed regardless after the last attempt."""
    lay = b.opts.lay
    vbits = b.register("verify", b.opts.prep_attempts)
    anc = ANCILLAS[0]
    for i in range(b.opts.prep_attempts):
        if i:
            b.push_condition(Condition.eq(vbits[:i], (1,) * i))
        encode_zero(b, first=i == 0)
        for q in lay.verify:
            b.add(gate("CNOT", q, anc))
        b.add(measure(anc, vbits[i]))
        if i:
            b.pop_condition()


def rotate_init(b: _Builder, init_state: str) -> None:
    if init_state == "|0>":
        return
    if init_state == "|1>":
        logical_x(b)
    elif init_state == "|+>":
        logical_h(b)
    elif init_state == "|->":
        logical_x(b)
        logical_h(b)
    elif init_state == "|+i>":
        logical_h(b)
        logical_s(b)
    elif init_state == "|-i>":
        logical_x(b)
        logical_h(b)
        logical_s(b)
    else:
        raise ValueError(f"unknown initial state {init_state!r}")


def rotate_meas(b: _Builder, basis: str) -> None:
    if basis == "Z":
        return
    if basis == "X":
        logical_h(b)
    elif basis == "Y":
        logical_sdg(b)
        logical_h(b)
    else:
        raise ValueError(f"unknown measurement basis {basis!r}")


def _syndrome_round(b: _Builder, kinds: str, bits) -> None:
    """Measure plaquette i with ancilla i, X-type or Z-type per ``kinds[i]``.

    Mixed rounds (the flagged ones) include the ancilla links."""
    lay = b.opts.lay
    mixed = len(set(kinds)) > 1
    b.add(*(reset(a) for a in ANCILLAS))
    xs = [a for a, k in zip(ANCILLAS, kinds) if k == "X"]
    b.add(*(gate("H", a) for a in xs))
    for t in range(lay.steps):
        pairs = []
        for a, k, sched in zip(ANCILLAS, kinds, lay.flagged):
            for d, td in sched:
                if td == t:
                    pairs.append((a, d) if k == "X" else (d, a))
        for i, j, tl in lay.links if mixed else ():
            if tl == t:
                if kinds[i] == kinds[j]:
                    raise ValueError(f"link between two {kinds[i]}-type ancillas")
                pairs.append((ANCILLAS[i], ANCILLAS[j]) if kinds[i] == "X"
                             else (ANCILLAS[j], ANCILLAS[i]))
        if pairs:
            b.cnots(pairs)
    b.add(*(gate("H", a) for a in xs))
    b.add(*(measure(a, bit) for a, bit in zip(ANCILLAS, bits)))


def _decode_into(b: _Builder, diff, flag, frame_bit) -> None:
    """Conditional frame flips implementing decoder_2d and decoder_flag_update."""
    for syn in sorted(BAD_SYNDROMES):
        b.add(cflip((frame_bit,)).with_condition(Condition.eq(diff, syn)))
    for fl, syn in sorted(FLAG_CASES):
        b.add(cflip((frame_bit,)).with_condition(Condition.eq(diff, syn) & Condition.eq(flag, fl)))


def qec_cycle(b: _Builder, k: int) -> None:
    """One adaptive cycle: flagged xzz round, flagged zxx round if quiet, and the
    unflagged six-plaquette round plus decoding if either flagged round moved."""
    R = b.registers
    lx, lz, pf = R["last_x"], R["last_z"], R["pf"]
    r1 = b.register(f"c{k}_r1", 3)
    r2 = b.register(f"c{k}_r2", 3)
    fx = b.register(f"c{k}_fx", 3)
    fz = b.register(f"c{k}_fz", 3)
    ux = b.register(f"c{k}_ux", 3)
    uz = b.register(f"c{k}_uz", 3)

    b.add(cset(fx + fz, (0,) * 6))
    _syndrome_round(b, "XZZ", r1)
    d1 = (fx[0], fz[1], fz[2])
    b.classical(cxor(d1, r1), cxor(d1, (lx[0], lz[1], lz[2])))

    b.push_condition(Condition.eq(d1, (0, 0, 0)))
    _syndrome_round(b, "ZXX", r2)
    d2 = (fz[0], fx[1], fx[2])
    b.classical(cxor(d2, r2), cxor(d2, (lz[0], lx[1], lx[2])))
    b.pop_condition()

    b.push_condition(Condition.ne(fx + fz, (0,) * 6))
    _syndrome_round(b, "XXX", ux)
    _syndrome_round(b, "ZZZ", uz)
    # ux <- new ^ old (the diff), then last <- old ^ diff = new
    b.classical(cxor(ux, lx), cxor(uz, lz))
    b.classical(cxor(lx, ux), cxor(lz, uz))
    # X-type changes locate Z errors (fz); Z-type changes locate X errors (fx)
    _decode_into(b, ux, fx, pf[1])
    _decode_into(b, uz, fz, pf[0])
    b.pop_condition()


def _begin(opts: BuildOptions) -> _Builder:
    b = _Builder(opts)
    b.register("last_x", 3)
    b.register("last_z", 3)
    b.register("pf", 2)
    b.add(cset(b.registers["last_x"] + b.registers["last_z"] + b.registers["pf"], (0,) * 8))
    return b


def _finish(b: _Builder, basis: str) -> Circuit:
    rotate_meas(b, basis)
    data = b.register("data", 7)
    b.add(*(measure(q, bit) for q, bit in zip(DATA, data)))
    return b.build()


def memory_circuit(init_state: str, cycles: int, basis: str | None = None,
                   opts: BuildOptions | None = None) -> Circuit:
    """FT preparation, logical rotation, ``cycles`` QEC cycles and readout."""
    opts = opts or BuildOptions()
    if cycles < 0:
        raise ValueError("cycles must be >= 0")
    basis = basis or NATURAL_BASIS[init_state]
    b = _begin(opts)
    if init_state == "|T>":
        if basis not in ("X", "Y"):
            raise ValueError("|T> is read out in the X or Y basis")
        encode_tstate(b)
    else:
        ftprep_zero(b)
        rotate_init(b, init_state)
    for k in range(cycles):
        qec_cycle(b, k)
    return _finish(b, basis)


def sgate_circuit(active: bool, opts: BuildOptions | None = None,
                  forced_frame: tuple | None = None) -> Circuit:
    """|+>_L, one cycle, frame handling, logical S, one cycle, Y readout.

    ``forced_frame`` XORs fixed bits into the frame after the first cycle
    (used to check the frame algebra)."""
    opts = opts or BuildOptions()
    b = _begin(opts)
    ftprep_zero(b)
    rotate_init(b, "|+>")
    qec_cycle(b, 0)
    pf = b.registers["pf"]
    if forced_frame is not None:
        flips = tuple(bit for bit, v in zip(pf, forced_frame) if v)
        if flips:
            b.add(cflip(flips))
    if active:
        b.push_condition(Condition.eq((pf[0],), (1,)))
        logical_x(b)
        b.pop_condition()
        b.push_condition(Condition.eq((pf[1],), (1,)))
        logical_z(b)
        b.pop_condition()
        b.add(cset(pf, (0, 0)))
    else:
        b.add(cxor((pf[1],), (pf[0],)))
    logical_s(b)
    qec_cycle(b, 1)
    return _finish(b, "Y")


def encode_tstate(b: _Builder) -> None:
    """Non-FT encoder of T|+> on data qubit 7 into the code block."""
    b.add(*(prep0(q) for q in DATA + ANCILLAS))
    src = 6
    b.add(gate("H", src))
    b.add(gate("T", src))
    b.cnots([(src, 4)])
    b.cnots([(src, 5)])
    pivots = {0: (2, 4, 6), 1: (2, 4, 5), 3: (2, 5, 6)}
    b.add(*(gate("H", p) for p in pivots))
    for st in _fanout_steps(pivots):
        b.cnots(st)


def _fanout_steps(pivots: dict) -> list:
    """Split pivot fan-outs into steps with no shared target (greedy, deterministic)."""
    pending = {p: list(t) for p, t in pivots.items()}
    steps = []
    while any(pending.values()):
        used, step = set(), []
        for p in sorted(pending):
            for t in pending[p]:
                if t not in used:
                    step.append((p, t))
                    used.add(t)
                    pending[p].remove(t)
                    break
        steps.append(step)
    return steps


def tstate_circuit(basis: str, cycles: int = 0, opts: BuildOptions | None = None) -> Circuit:
    return memory_circuit("|T>", cycles, basis, opts)


def reference_cycle_circuit(opts: BuildOptions | None = None) -> Circuit:
    """The two flagged rounds of one cycle, which is what nearly every cycle runs.

    Used as the default circuit for timing calibration."""
    opts = opts or BuildOptions()
    b = _Builder(opts)
    _syndrome_round(b, "XZZ", b.register("r1", 3))
    _syndrome_round(b, "ZXX", b.register("r2", 3))
    return b.build()


# ---------------------------------------------------------------- classical decoding

def decoder_2d(syndrome_diff) -> int:
    """1 iff the change matches a single error on qubits 5, 6 or 7."""
    return int(tuple(int(v) for v in syndrome_diff) in BAD_SYNDROMES)


def decoder_flag_update(syndrome_diff, flag_diff) -> int:
    """1 iff (flag, syndrome) identifies a hook that decoder_2d would misread."""
    key = (tuple(int(v) for v in flag_diff), tuple(int(v) for v in syndrome_diff))
    return int(key in FLAG_CASES)


def _plaquette_parities(m: np.ndarray) -> np.ndarray:
    """(shots, 7) readout -> (shots, 3) plaquette parities."""
    code = steane_code()
    return np.stack([np.bitwise_xor.reduce(m[:, list(p)], axis=1) for p in code.plaquettes],
                    axis=1)


def logical_meas(m, basis: str, last_x, last_z, pf):
    """Decode a destructive readout; vectorised over a leading shot axis.

    ``m`` has shape (7,) or (shots, 7); the other arguments broadcast.
    """
    m = np.atleast_2d(np.asarray(m, dtype=np.uint8))
    last_x = np.atleast_2d(np.asarray(last_x, dtype=np.uint8))
    last_z = np.atleast_2d(np.asarray(last_z, dtype=np.uint8))
    pf = np.atleast_2d(np.asarray(pf, dtype=np.uint8))
    code = steane_code()
    raw = np.bitwise_xor.reduce(m[:, list(code.logical_support)], axis=1)
    syn = _plaquette_parities(m)
    if basis == "X":
        diff = syn ^ last_x
        frame = pf[:, 1]
    elif basis == "Y":
        diff = syn ^ last_x ^ last_z
        frame = pf[:, 0] ^ pf[:, 1]
    elif basis == "Z":
        diff = syn ^ last_z
        frame = pf[:, 0]
    else:
        raise ValueError(f"unknown measurement basis {basis!r}")
    code_ = diff[:, 0] * 4 + diff[:, 1] * 2 + diff[:, 2]
    corr = np.isin(code_, [2, 3, 1]).astype(np.uint8)
    out = raw ^ corr ^ frame
    return out if out.shape[0] > 1 else int(out[0])


def expected_result(meas_output: int, init_state: str, meas_basis: str) -> int:
    """1 if the decoded outcome agrees with the prepared state, else 0."""
    key = (meas_basis, init_state)
    if key in ZERO_OUTCOMES:
        expected = 0
    elif key in ONE_OUTCOMES:
        expected = 1
    else:
        raise ValueError(f"unexpected state/basis pair {init_state}, {meas_basis}")
    return int(meas_output == expected)


def expected_bit(init_state: str, basis: str) -> int:
    if (basis, init_state) in ZERO_OUTCOMES:
        return 0
    if (basis, init_state) in ONE_OUTCOMES:
        return 1
    raise ValueError(f"unexpected state/basis pair {init_state}, {basis}")


def replay_cycle_logic(r1, r2, ux, uz, last_x, last_z, pf):
    """Reference (scalar) implementation of one cycle's classical processing.

    ``r2``/``ux``/``uz`` are only consulted when the corresponding round would
    have run.  Returns (ran_r2, ran_unflagged, last_x, last_z, pf).
    """
    last_x, last_z, pf = list(last_x), list(last_z), list(pf)
    flag_x = [r1[0] ^ last_x[0], 0, 0]
    flag_z = [0, r1[1] ^ last_z[1], r1[2] ^ last_z[2]]
    ran_r2 = not any(flag_x) and not any(flag_z)
    if ran_r2:
        flag_z[0] = r2[0] ^ last_z[0]
        flag_x[1] = r2[1] ^ last_x[1]
        flag_x[2] = r2[2] ^ last_x[2]
    ran_un = any(flag_x) or any(flag_z)
    if ran_un:
        dx = [a ^ b for a, b in zip(ux, last_x)]
        dz = [a ^ b for a, b in zip(uz, last_z)]
        # X-type changes locate Z errors (fz); Z-type changes locate X errors (fx)
        pf[1] ^= decoder_2d(dx) ^ decoder_flag_update(dx, flag_x)
        pf[0] ^= decoder_2d(dz) ^ decoder_flag_update(dz, flag_z)
        last_x, last_z = list(ux), list(uz)
    return ran_r2, ran_un, last_x, last_z, pf


# ---------------------------------------------------------------- timing

@lru_cache(maxsize=16)
def default_timing(opts: BuildOptions | None = None, two_pi: bool = True) -> TimingTable:
    """Durations calibrated so one flagged cycle averages
    ``DEFAULT_WINDOW_DEPHASING`` per window at the coherent rate.

    ``two_pi`` must match the angle convention of the noise model the
    durations are used with."""
    nm = NoiseModel(dephasing_mode="coherent", two_pi=two_pi)
    return calibrate_timing(nm, DEFAULT_WINDOW_DEPHASING, reference_cycle_circuit(opts),
                            DEFAULT_TIMING_SHAPE)


# ---------------------------------------------------------------- experiments

@dataclass(frozen=True)
class ExperimentConfig:
    init_state: str = "|0>"
    meas_basis: str | None = None
    num_cycles: int = 0
    shots: int = 1000
    backend: str = "frame"
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    active_correction: bool = False
    timing: TimingTable | None = None
    options: BuildOptions = field(default_factory=BuildOptions)
    workers: int = 1
    groups: int = 10

    def __post_init__(self):
        if self.init_state not in INIT_STATES + ("|T>",):
            raise ValueError(f"unknown initial state {self.init_state!r}")
        if self.init_state == "|T>" and self.basis not in ("X", "Y"):
            raise ValueError("|T> must be read out in the X or Y basis")
        if self.num_cycles < 0:
            raise ValueError("num_cycles must be >= 0")

    @property
    def basis(self) -> str:
        return self.meas_basis or NATURAL_BASIS[self.init_state]


@dataclass
class RunSummary:
    """Aggregated outcome of one experiment configuration."""

    label: str
    shots: int
    failures: int
    outcomes: np.ndarray = field(repr=False)
    verify_attempts: np.ndarray = field(repr=False, default=None)
    unflagged_runs: int = 0
    groups: int = 10

    @property
    def error_rate(self) -> float:
        return self.failures / self.shots if self.shots else float("nan")

    @property
    def fidelity(self) -> float:
        return 1.0 - self.error_rate

    @property
    def binomial_std(self) -> float:
        p = self.error_rate
        return math.sqrt(max(p * (1 - p), 0.0) / self.shots) if self.shots else float("nan")

    def group_rates(self, groups: int | None = None) -> np.ndarray:
        g = groups or self.groups
        fails = (self.outcomes != 0).astype(float)
        return np.array([chunk.mean() for chunk in np.array_split(fails, g) if chunk.size])

    def jackknife(self, groups: int | None = None) -> tuple:
        from .analysis import jackknife
        return jackknife(self.group_rates(groups))

    def to_dict(self) -> dict:
        mean, std = self.jackknife()
        return {"label": self.label, "shots": self.shots, "failures": self.failures,
                "error_rate": self.error_rate, "jackknife_mean": mean, "jackknife_std": std,
                "binomial_std": self.binomial_std, "unflagged_runs": self.unflagged_runs}


def _timing_for(cfg: ExperimentConfig) -> TimingTable | None:
    if cfg.noise.dephasing_mode == "off":
        return None
    opts = cfg.options if cfg.options != BuildOptions() else None
    return cfg.timing or default_timing(opts, cfg.noise.two_pi)


def _backend_for(cfg: ExperimentConfig, circuit_has_t: bool) -> str:
    if cfg.noise.dephasing_mode == "coherent" or circuit_has_t:
        if cfg.backend not in ("dense",):
            raise ValueError(f"this run needs the dense backend, not {cfg.backend!r}")
    return cfg.backend


def _summarize(label, c: Circuit, res, basis: str, expected: int, groups: int) -> RunSummary:
    reg = res.registers
    m = res.creg[:, list(reg["data"])]
    pf = res.creg[:, list(reg["pf"])]
    lx = res.creg[:, list(reg["last_x"])]
    lz = res.creg[:, list(reg["last_z"])]
    out = logical_meas(m, basis, lx, lz, pf)
    out = np.atleast_1d(out)
    fails = (out != expected).astype(np.uint8)
    attempts = None
    if "verify" in reg:
        v = res.creg[:, list(reg["verify"])]
        # attempts used = 1 + number of leading failed verifications
        attempts = 1 + np.cumprod(v[:, :-1], axis=1).sum(axis=1) if v.shape[1] > 1 else \
            np.ones(len(v), dtype=int)
    unf = 0
    for name in reg:
        if name.endswith("_fx"):
            k = name[:-3]
            f = res.creg[:, list(reg[f"{k}_fx"]) + list(reg[f"{k}_fz"])]
            unf += int(f.any(axis=1).sum())
    return RunSummary(label, len(out), int(fails.sum()), fails, attempts, unf, groups)


def run_memory_experiment(cfg: ExperimentConfig) -> RunSummary:
    """Shots of preparation, ``num_cycles`` cycles and decoded readout."""
    c = memory_circuit(cfg.init_state, cfg.num_cycles, cfg.basis, cfg.options)
    backend = _backend_for(cfg, cfg.init_state == "|T>")
    res = run_batch(c, cfg.noise, cfg.shots, cfg.seed, backend, _timing_for(cfg),
                    workers=cfg.workers)
    if cfg.init_state == "|T>":
        expected = 0
    else:
        expected = expected_bit(cfg.init_state, cfg.basis)
    label = f"{cfg.init_state}/{cfg.basis}/c{cfg.num_cycles}"
    return _summarize(label, c, res, cfg.basis, expected, cfg.groups)


def run_sgate_experiment(cfg: ExperimentConfig) -> RunSummary:
    """Active-correction or frame-update variant; fidelity = P(Y outcome is +1)."""
    c = sgate_circuit(cfg.active_correction, cfg.options)
    res = run_batch(c, cfg.noise, cfg.shots, cfg.seed, _backend_for(cfg, False),
                    _timing_for(cfg), workers=cfg.workers)
    label = "sgate/" + ("active" if cfg.active_correction else "software")
    return _summarize(label, c, res, "Y", 0, cfg.groups)


def magic_state_error(x_counts, y_counts) -> float:
    """Error of T|+>_L from (zeros, ones) counts in the X and Y readouts.

    Returns 1 - (1 + (E_X + E_Y)/sqrt(2))/2, clamped at 0 (the operator has
    eigenvalues outside [0, 1] for non-physical estimates).
    """
    ex = _expectation(x_counts)
    ey = _expectation(y_counts)
    return max(0.0, 1.0 - 0.5 * (1.0 + (ex + ey) / math.sqrt(2)))


def _expectation(counts) -> float:
    zeros, ones = counts
    n = zeros + ones
    if n <= 0:
        raise ValueError("empty dataset")
    return (zeros - ones) / n


@dataclass
class MagicResult:
    x: RunSummary
    y: RunSummary

    @property
    def error(self) -> float:
        return magic_state_error(_counts(self.x), _counts(self.y))

    @property
    def std(self) -> float:
        # the estimate is linear in the two failure fractions
        sx = self.x.binomial_std
        sy = self.y.binomial_std
        return math.sqrt(sx ** 2 + sy ** 2) / math.sqrt(2)


def _counts(s: RunSummary) -> tuple:
    return s.shots - s.failures, s.failures


def prep_tstate(cfg: ExperimentConfig) -> MagicResult:
    """Prepare T|+>_L (half the shots read in X, half in Y) on the dense backend."""
    if cfg.backend != "dense":
        raise ValueError("the magic state needs the dense backend (T is not Clifford)")
    half = cfg.shots // 2
    xs = run_memory_experiment(replace(cfg, init_state="|T>", meas_basis="X", shots=half))
    ys = run_memory_experiment(replace(cfg, init_state="|T>", meas_basis="Y",
                                       shots=cfg.shots - half, seed=cfg.seed + 1))
    return MagicResult(xs, ys)


def quiet_noise() -> NoiseModel:
    return noiseless()


__all__ = [
    "Layout", "BuildOptions", "memory_circuit", "sgate_circuit", "tstate_circuit",
    "reference_cycle_circuit", "decoder_2d", "decoder_flag_update", "logical_meas",
    "expected_result", "replay_cycle_logic", "ExperimentConfig", "RunSummary",
    "run_memory_experiment", "run_sgate_experiment", "prep_tstate", "magic_state_error",
    "default_timing", "preset",
]
