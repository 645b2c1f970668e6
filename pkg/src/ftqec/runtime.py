"""Shot execution: walk a circuit slice by slice on a backend, sampling noise.

Noise attachment rules
----------------------
* gates: depolarizing and spontaneous emission *after* the gate (virtual
  z-rotations are noiseless);
* ``prep0``/``reset``: bit flip and leakage after initialization; reset clears
  the leaked flag first;
* ``measure``: readout (a qubit that is already leaked reads 1), a flip of the
  recorded bit for non-leaked qubits, then leakage that affects later
  operations (``meas_leak_first`` moves it ahead of the readout instead);
* crosstalk: single-qubit depolarizing on every qubit idle during a slice that
  measures or resets;
* dephasing: one transport window for every qubit plus one wait window per
  qubit, taken from the :class:`~ftqec.circuit.Schedule`, applied after the
  slice to the shots that executed it.

Leakage: a leak event applies a uniformly random Pauli to the qubit and marks
it leaked.  Gates skip leaked qubits; a CNOT with exactly one leaked qubit is
skipped, re-twirls the leaked qubit, and depolarizes the partner with
probability ``leak_spread``.

Seeding: shots are processed in chunks of ``CHUNK`` and chunk ``i`` draws from
``SeedSequence([seed, i])``, so results do not depend on how chunks are
distributed over workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backends import DenseBackend, FrameBackend, TableauBackend
from .circuit import GATES_2Q, PAULI_GATES, VIRTUAL_GATES, Circuit, TimingTable, schedule
from .noise import (PAULI_CODE, PAULI_NAME, Fault, NoiseModel, crosstalk_prob, noiseless,
                    sample_instruction_noise)

CHUNK = 4096
BACKENDS = ("tableau", "frame", "dense")


class BackendCapabilityError(ValueError):
    pass


@dataclass
class ShotRecord:
    """Classical outcome of one shot."""

    shot: int
    bits: np.ndarray
    faults: list = field(default_factory=list)

    def register(self, registers: dict, name: str) -> tuple:
        return tuple(int(self.bits[b]) for b in registers[name])

    def to_json(self) -> str:
        d = {"shot": self.shot, "bits": "".join(str(int(b)) for b in self.bits)}
        if self.faults:
            d["faults"] = [f.to_dict() for f in self.faults]
        return json.dumps(d)


@dataclass
class BatchResult:
    """Classical registers of many shots, shape (shots, n_bits)."""

    creg: np.ndarray
    registers: dict
    faults: list | None = None

    @property
    def shots(self) -> int:
        return self.creg.shape[0]

    def reg(self, name: str) -> np.ndarray:
        return self.creg[:, list(self.registers[name])]

    def record(self, i: int) -> ShotRecord:
        return ShotRecord(i, self.creg[i].copy(), list(self.faults[i]) if self.faults else [])


def _dephasing_plan(c: Circuit, nm: NoiseModel, timing: TimingTable | None):
    """Per slice: list of (value, qubits) with value = Z probability or RZ angle."""
    plan = [[] for _ in c.slices]
    if timing is None or nm.dephasing_mode == "off" or nm.rate == 0:
        return plan
    sched = schedule(c, timing)
    for k in range(len(c.slices)):
        for d, qs in sched.windows(k):
            if nm.dephasing_mode == "coherent":
                plan[k].append((nm.coherent_angle(d), qs))
            else:
                plan[k].append((nm.dephasing_prob(d), qs))
    return plan


def _group_faults(faults, shots: int) -> dict:
    """Map slice -> list of (shot mask, Fault); ``faults`` is global or per-shot."""
    out: dict = {}
    if not faults:
        return out
    if isinstance(faults[0], Fault):
        allm = np.ones(shots, dtype=bool)
        for f in faults:
            out.setdefault(f.slice, []).append((allm, f))
        return out
    if len(faults) != shots:
        raise ValueError("per-shot fault lists must have one entry per shot")
    keyed: dict = {}
    for s, fl in enumerate(faults):
        for f in fl:
            keyed.setdefault(f, []).append(s)
    for f, ss in keyed.items():
        m = np.zeros(shots, dtype=bool)
        m[ss] = True
        out.setdefault(f.slice, []).append((m, f))
    return out


class Executor:
    """Runs one chunk of shots of a circuit on a backend."""

    def __init__(self, c: Circuit, nm: NoiseModel, backend, shots: int,
                 rng: np.random.Generator, timing: TimingTable | None = None,
                 faults=None, log_faults: bool = False, reference_mode: bool = False):
        self.c = c
        self.nm = nm
        self.be = backend
        self.shots = shots
        self.rng = rng
        self.noisy = not nm.is_noiseless
        self.plan = _dephasing_plan(c, nm, timing)
        if any(self.plan) and nm.dephasing_mode == "coherent" and not backend.supports_coherent:
            raise BackendCapabilityError(
                f"coherent dephasing is not supported by the {backend.name} backend")
        self.replay = _group_faults(faults, shots)
        self.log = [[] for _ in range(shots)] if log_faults else None
        self.reference_mode = reference_mode
        self.creg = np.zeros((shots, c.n_bits), dtype=np.uint8)
        self.leaked = np.zeros((c.n_qubits, shots), dtype=bool)
        self.flip_next: dict = {}

    # ------------------------------------------------------------ helpers

    def _mask(self, ins, cache) -> np.ndarray:
        cond = ins.condition
        if cond is None:
            return cache.setdefault(None, np.ones(self.shots, dtype=bool))
        if self.reference_mode:
            # the reference run explores every conditional block except Pauli corrections
            ok = not (ins.kind == "gate" and ins.gate in PAULI_GATES)
            return np.full(self.shots, ok)
        if cond not in cache:
            cache[cond] = cond.evaluate(self.creg)
        return cache[cond]

    def _log(self, k, q, codes, origin, channel="pauli", before=False):
        if self.log is None:
            return
        for s in np.flatnonzero(codes):
            lab = PAULI_NAME[codes[s]] if channel != "flip" else ""
            self.log[s].append(Fault(k, (q,), channel, lab, origin, before))

    def _pauli(self, k, q, codes, mask, origin):
        codes = np.where(mask & ~self.leaked[q], codes, 0).astype(np.int8)
        if codes.any():
            self.be.apply_pauli(q, codes)
            self._log(k, q, codes, origin)

    def _leak(self, k, q, fired, mask, origin, before=False):
        fired = fired & mask & ~self.leaked[q]
        if not fired.any():
            return
        twirl = np.where(fired, self.rng.integers(0, 4, self.shots), 0).astype(np.int8)
        self.be.apply_pauli(q, twirl)
        self.leaked[q] |= fired
        if self.log is not None:
            for s in np.flatnonzero(fired):
                self.log[s].append(Fault(k, (q,), "leak", PAULI_NAME[twirl[s]], origin, before))

    def _apply_draw(self, k, draw, mask):
        for q, fired, origin in draw.leaks:
            self._leak(k, q, fired, mask, origin)
        for q, codes, origin in draw.paulis:
            self._pauli(k, q, codes, mask, origin)

    def _replay(self, k, before, qmask, active):
        # a fault only fires in shots that executed its location
        for m, f in self.replay.get(k, ()):
            # recorded flips are consumed by the measurement itself, so they load beforehand
            when = True if f.channel == "flip" else f.before
            if when != before:
                continue
            for q in f.qubits:
                m = m & qmask.get(q, active)
            if not m.any():
                continue
            if f.channel == "pauli":
                for q, p in zip(f.qubits, f.pauli):
                    if p != "I":
                        self.be.apply_pauli(q, np.where(m, PAULI_CODE[p], 0).astype(np.int8))
            elif f.channel == "leak":
                q = f.qubits[0]
                self.be.apply_pauli(q, np.where(m, PAULI_CODE[f.pauli or "I"], 0).astype(np.int8))
                self.leaked[q] |= m
            elif f.channel == "flip":
                q = f.qubits[0]
                self.flip_next[(k, q)] = self.flip_next.get((k, q), 0) ^ m
            else:
                raise ValueError(f"unknown fault channel {f.channel!r}")

    # ------------------------------------------------------------ execution

    def run(self) -> np.ndarray:
        for k, sl in enumerate(self.c.slices):
            if all(ins.is_classical for ins in sl):
                # injected faults on a classical slice hit every shot
                everyone = np.ones(self.shots, dtype=bool)
                self._replay(k, True, {}, everyone)
                self._classical(sl)
                self._replay(k, False, {}, everyone)
                continue
            cache: dict = {}
            masks = []
            for ins in sl:
                if ins.is_classical:
                    raise ValueError(f"slice {k} mixes classical and quantum instructions")
                masks.append(self._mask(ins, cache))
            active = np.zeros(self.shots, dtype=bool)
            qmask = {}
            for ins, m in zip(sl, masks):
                active |= m
                for q in ins.qubits:
                    qmask[q] = m
            self._replay(k, True, qmask, active)
            mr_mask = np.zeros(self.shots, dtype=bool)
            touched = set()
            for ins, m in zip(sl, masks):
                if not m.any():
                    continue
                touched.update(ins.qubits)
                if ins.kind in ("measure", "reset", "prep0"):
                    mr_mask |= m
                self._instruction(k, ins, m)
            self._replay(k, False, qmask, active)
            if self.noisy and mr_mask.any():
                p = crosstalk_prob(sl, self.nm)
                if p > 0:
                    for q in range(self.c.n_qubits):
                        if q in touched:
                            continue
                        fired = self.rng.random(self.shots) < p
                        codes = np.where(fired, self.rng.integers(1, 4, self.shots), 0)
                        self._pauli(k, q, codes.astype(np.int8), mr_mask, "crosstalk")
            if self.plan[k] and active.any():
                self._dephase(k, active)
        return self.creg

    def _dephase(self, k, active):
        if self.nm.dephasing_mode == "coherent":
            thetas = np.zeros(self.c.n_qubits)
            for th, qs in self.plan[k]:
                thetas[qs] += th
            self.be.apply_rz_layer(thetas, active)
            return
        for p, qs in self.plan[k]:
            if p <= 0:
                continue
            for q in qs:
                fired = self.rng.random(self.shots) < p
                self._pauli(k, int(q), np.where(fired, 3, 0).astype(np.int8), active, "dephasing")

    def _classical(self, sl):
        for ins in sl:
            # classical logic always follows the register, also in reference mode
            if ins.condition is None:
                m = np.ones(self.shots, dtype=bool)
            else:
                m = ins.condition.evaluate(self.creg)
            if not m.any():
                continue
            tgt = list(ins.target)
            if ins.kind == "cset":
                self.creg[np.ix_(m, tgt)] = np.asarray(ins.value, dtype=np.uint8)
            elif ins.kind == "cxor":
                self.creg[np.ix_(m, tgt)] ^= self.creg[np.ix_(m, list(ins.source))]
            elif ins.kind == "cflip":
                self.creg[np.ix_(m, tgt)] ^= 1

    def _instruction(self, k, ins, m):
        nm = self.nm
        if ins.kind == "gate":
            qs = ins.qubits
            if ins.gate in GATES_2Q:
                a, b = qs
                la, lb = self.leaked[a], self.leaked[b]
                run = m & ~la & ~lb
                self.be.apply_gate(ins.gate, qs, run, ins.angle, ins.condition is not None)
                one = m & (la ^ lb)
                if one.any() and self.noisy:
                    self._leaked_partner(k, a, b, one)
            else:
                q = qs[0]
                run = m & ~self.leaked[q]
                self.be.apply_gate(ins.gate, qs, run, ins.angle, ins.condition is not None)
            if self.noisy and not (ins.gate in VIRTUAL_GATES):
                self._apply_draw(k, sample_instruction_noise(ins, nm, self.rng, self.shots), m)
        elif ins.kind in ("prep0", "reset"):
            q = ins.qubits[0]
            self.be.reset(q, m)
            self.leaked[q] &= ~m
            if self.noisy:
                self._apply_draw(k, sample_instruction_noise(ins, nm, self.rng, self.shots), m)
        elif ins.kind == "measure":
            q = ins.qubits[0]
            bit = ins.target[0]
            flip = None
            draw = None
            if self.noisy:
                draw = sample_instruction_noise(ins, nm, self.rng, self.shots)
                flip = draw.flip
                if nm.meas_leak_first:
                    for qq, fired, origin in draw.leaks:
                        self._leak(k, qq, fired, m, origin, before=True)
            was_leaked = self.leaked[q].copy()
            out = self.be.measure(q, m, (k, q)) | was_leaked
            if draw is not None and not nm.meas_leak_first:
                for qq, fired, origin in draw.leaks:
                    self._leak(k, qq, fired, m, origin)
            if flip is not None:
                flip = flip & m & ~was_leaked
                if flip.any():
                    out = out ^ flip
                    self._log(k, q, flip.astype(np.int8), "meas_bitflip", "flip")
            extra = self.flip_next.pop((k, q), None)
            if extra is not None:
                out = out ^ (extra & ~was_leaked)
            self.creg[m, bit] = out[m]
        elif ins.kind == "idle":
            pass
        else:
            raise ValueError(f"unknown instruction kind {ins.kind!r}")

    def _leaked_partner(self, k, a, b, one):
        for lq, pq in ((a, b), (b, a)):
            sel = one & self.leaked[lq]
            if not sel.any():
                continue
            tw = np.where(sel, self.rng.integers(0, 4, self.shots), 0).astype(np.int8)
            self.be.apply_pauli(lq, tw)
            self._log(k, lq, tw, "leak_twirl")
            hit = sel & (self.rng.random(self.shots) < self.nm.leak_spread)
            codes = np.where(hit, self.rng.integers(0, 4, self.shots), 0).astype(np.int8)
            self._pauli(k, pq, codes, hit, "leak_spread")


# ---------------------------------------------------------------- front ends

_REFERENCE_CACHE: dict = {}


def reference_sample(c: Circuit) -> dict:
    """Noiseless measurement outcomes of ``c`` with every conditional block executed
    (except conditional Pauli corrections), keyed by (slice, qubit)."""
    key = id(c)
    hit = _REFERENCE_CACHE.get(key)
    if hit is not None and hit[0] is c:
        return hit[1]
    be = TableauBackend(c.n_qubits, 1, np.random.default_rng(0))
    Executor(c, noiseless(), be, 1, be.rng, reference_mode=True).run()
    if len(_REFERENCE_CACHE) > 64:
        _REFERENCE_CACHE.clear()
    _REFERENCE_CACHE[key] = (c, be.record)
    return be.record


def make_backend(name: str, c: Circuit, shots: int, rng: np.random.Generator):
    if name == "tableau":
        return TableauBackend(c.n_qubits, shots, rng)
    if name == "frame":
        return FrameBackend(c.n_qubits, shots, rng, reference_sample(c))
    if name == "dense":
        return DenseBackend(c.n_qubits, shots, rng)
    raise ValueError(f"unknown backend {name!r}; choose from {BACKENDS}")


def chunk_rngs(seed: int, index: int) -> tuple:
    meas, noise = np.random.SeedSequence([int(seed), int(index)]).spawn(2)
    return np.random.default_rng(meas), np.random.default_rng(noise)


def run_chunk(c: Circuit, nm: NoiseModel, shots: int, seed: int, index: int,
              backend: str = "frame", timing: TimingTable | None = None,
              faults=None, log_faults: bool = False) -> BatchResult:
    mrng, nrng = chunk_rngs(seed, index)
    be = make_backend(backend, c, shots, mrng)
    ex = Executor(c, nm, be, shots, nrng, timing, faults, log_faults)
    creg = ex.run()
    return BatchResult(creg, dict(c.registers), ex.log)


def run_batch(c: Circuit, nm: NoiseModel, shots: int, seed: int = 0, backend: str = "frame",
              timing: TimingTable | None = None, faults=None, log_faults: bool = False,
              workers: int = 1, chunk: int = CHUNK) -> BatchResult:
    """Run ``shots`` shots in fixed-size chunks; identical for any ``workers``.

    ``faults`` is either one list replayed in every shot or a list of per-shot lists.
    """
    if shots < 0:
        raise ValueError("shots must be non-negative")
    per_shot = bool(faults) and not isinstance(faults[0], Fault)
    jobs = []
    for i, start in enumerate(range(0, shots, chunk)):
        n = min(chunk, shots - start)
        fl = faults[start:start + n] if per_shot else faults
        jobs.append((c, nm, n, seed, i, backend, timing, fl, log_faults))
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_job, jobs))
    else:
        parts = [_run_job(j) for j in jobs]
    if not parts:
        return BatchResult(np.zeros((0, c.n_bits), dtype=np.uint8), dict(c.registers),
                           [] if log_faults else None)
    creg = np.concatenate([p.creg for p in parts])
    log = None
    if log_faults:
        log = [fl for p in parts for fl in p.faults]
    return BatchResult(creg, dict(c.registers), log)


def _run_job(job):
    return run_chunk(*job)


def run_shot(c: Circuit, noise: NoiseModel | None = None, seed: int = 0, backend: str = "tableau",
             timing: TimingTable | None = None, faults: Sequence[Fault] | None = None,
             log_faults: bool = False) -> ShotRecord:
    """Execute a single shot; deterministic in ``seed``."""
    nm = noise or noiseless()
    res = run_chunk(c, nm, 1, seed, 0, backend, timing, list(faults) if faults else None,
                    log_faults)
    return res.record(0)
