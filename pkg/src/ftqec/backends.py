"""Batched simulator backends driven by :mod:`ftqec.runtime`.

All backends evolve ``shots`` independent copies of an ``n``-qubit register and
accept a boolean ``mask`` selecting the shots an operation applies to.

* :class:`TableauBackend` - one exact CHP tableau per shot.
* :class:`FrameBackend` - Pauli-frame sampler: a noiseless tableau reference
  run plus per-shot Pauli frames, vectorised over shots.  Exact for Clifford
  circuits with Pauli noise whose conditional blocks act trivially on the
  reference state (repeated syndrome rounds, repeat-until-success
  preparation, conditional Pauli corrections).
* :class:`DenseBackend` - state vectors (``n <= 12``), any single-qubit gate,
  coherent ``RZ`` dephasing.
"""

from __future__ import annotations

import math

import numpy as np

from .noise import PAULI_XZ
from .tableau import NonCliffordError, TableauState, rz_quarter_turns

MAX_DENSE_QUBITS = 12


class TableauBackend:
    name = "tableau"
    supports_coherent = False

    def __init__(self, n: int, shots: int, rng: np.random.Generator):
        self.n = n
        self.shots = shots
        self.rng = rng
        self.states = [TableauState(n) for _ in range(shots)]
        self.record: dict = {}

    def apply_gate(self, name, qubits, mask, angle=None, conditional=False):
        for s in np.flatnonzero(mask):
            self.states[s].apply(name, qubits, angle)

    def apply_pauli(self, q, codes, mask=None):
        for s in np.flatnonzero(codes if mask is None else (codes != 0) & mask):
            x, z = PAULI_XZ[codes[s]]
            self.states[s].pauli(q, int(x), int(z))

    def apply_rz(self, q, theta, mask):
        raise NonCliffordError("coherent dephasing needs the dense backend")

    apply_rz_layer = apply_rz

    def measure(self, q, mask, key):
        out = np.zeros(self.shots, dtype=bool)
        for s in np.flatnonzero(mask):
            out[s] = self.states[s].measure(q, self.rng)
        if self.shots == 1 and mask[0]:
            self.record[key] = int(out[0])
        return out

    def reset(self, q, mask):
        for s in np.flatnonzero(mask):
            self.states[s].reset(q, self.rng)


class FrameBackend:
    name = "frame"
    supports_coherent = False

    def __init__(self, n: int, shots: int, rng: np.random.Generator, reference: dict):
        self.n = n
        self.shots = shots
        self.rng = rng
        self.reference = reference
        self.x = np.zeros((n, shots), dtype=bool)
        # random Z on |0> is harmless and makes non-deterministic outcomes random
        self.z = rng.random((n, shots)) < 0.5

    def apply_gate(self, name, qubits, mask, angle=None, conditional=False):
        a = qubits[0]
        if name == "CNOT":
            b = qubits[1]
            self.x[b] ^= self.x[a] & mask
            self.z[a] ^= self.z[b] & mask
        elif name == "H":
            xa = self.x[a].copy()
            self.x[a] = np.where(mask, self.z[a], self.x[a])
            self.z[a] = np.where(mask, xa, self.z[a])
        elif name in ("S", "Sdg"):
            self.z[a] ^= self.x[a] & mask
        elif name in ("X", "Y", "Z"):
            # the reference run skipped conditional Paulis, so they become frame flips
            if conditional:
                xb, zb = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}[name]
                if xb:
                    self.x[a] ^= mask
                if zb:
                    self.z[a] ^= mask
        elif name == "I":
            pass
        elif name == "RZ":
            if rz_quarter_turns(angle) % 2:
                self.z[a] ^= self.x[a] & mask
        else:
            raise NonCliffordError(f"gate {name} is not supported by the frame backend")

    def apply_pauli(self, q, codes, mask=None):
        bits = PAULI_XZ[codes]
        xs, zs = bits[:, 0], bits[:, 1]
        if mask is not None:
            xs = xs & mask
            zs = zs & mask
        self.x[q] ^= xs
        self.z[q] ^= zs

    def apply_rz(self, q, theta, mask):
        raise NonCliffordError("coherent dephasing needs the dense backend")

    apply_rz_layer = apply_rz

    def measure(self, q, mask, key):
        try:
            ref = self.reference[key]
        except KeyError:
            raise RuntimeError(f"no reference outcome for measurement {key}") from None
        out = self.x[q] ^ bool(ref)
        self.z[q] ^= (self.rng.random(self.shots) < 0.5) & mask
        return out

    def reset(self, q, mask):
        self.x[q] &= ~mask
        self.z[q] = np.where(mask, self.rng.random(self.shots) < 0.5, self.z[q])


_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "S": np.diag([1, 1j]),
    "Sdg": np.diag([1, -1j]),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]),
    "Tdg": np.diag([1, np.exp(-1j * math.pi / 4)]),
}


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def gate_matrix(name: str, angle: float | None = None) -> np.ndarray:
    if name == "RZ":
        return rz_matrix(angle)
    return _1Q[name]


class DenseBackend:
    """State vectors of shape (shots, 2**n); qubit 0 is the most significant bit."""

    name = "dense"
    supports_coherent = True

    def __init__(self, n: int, shots: int, rng: np.random.Generator):
        if n > MAX_DENSE_QUBITS:
            raise ValueError(f"dense backend supports at most {MAX_DENSE_QUBITS} qubits, got {n}")
        self.n = n
        self.shots = shots
        self.rng = rng
        self.psi = np.zeros((shots, 2 ** n), dtype=complex)
        self.psi[:, 0] = 1.0
        self._phase_cache: dict = {}

    def _view(self, sub):
        return sub.reshape((sub.shape[0],) + (2,) * self.n)

    def _apply_1q(self, u, q, mask):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return
        if idx.size == self.shots:
            v = self._view(self.psi)
            self.psi = np.moveaxis(np.tensordot(u, v, axes=([1], [q + 1])), 0, q + 1).reshape(
                self.shots, -1)
            return
        v = self._view(self.psi[idx])
        v = np.moveaxis(np.tensordot(u, v, axes=([1], [q + 1])), 0, q + 1)
        self.psi[idx] = v.reshape(idx.size, -1)

    def apply_gate(self, name, qubits, mask, angle=None, conditional=False):
        if name == "CNOT":
            c, t = qubits
            idx = np.flatnonzero(mask)
            if idx.size == 0:
                return
            v = self._view(self.psi[idx])
            sel = [slice(None)] * (self.n + 1)
            sel[c + 1] = 1
            part = v[tuple(sel)]
            # target axis shifts down by one if it sits after the removed control axis
            t_axis = t + 1 if t < c else t
            v[tuple(sel)] = np.flip(part, axis=t_axis)
            self.psi[idx] = v.reshape(idx.size, -1)
            return
        if name not in _1Q and name != "RZ":
            raise ValueError(f"unknown gate {name}")
        self._apply_1q(gate_matrix(name, angle), qubits[0], mask)

    def apply_pauli(self, q, codes, mask=None):
        if mask is not None:
            codes = np.where(mask, codes, 0)
        for code, name in ((1, "X"), (2, "Y"), (3, "Z")):
            m = codes == code
            if m.any():
                self._apply_1q(_1Q[name], q, m)

    def apply_rz(self, q, theta, mask):
        self._apply_1q(rz_matrix(theta), q, mask)

    def apply_rz_layer(self, thetas, mask):
        """RZ(thetas[q]) on every qubit at once, as one diagonal phase."""
        idx = np.flatnonzero(mask)
        if idx.size == 0 or not np.any(thetas):
            return
        key = tuple(np.round(thetas, 15))
        phase = self._phase_cache.get(key)
        if phase is None:
            bits = (np.arange(2 ** self.n)[:, None] >> (self.n - 1 - np.arange(self.n))) & 1
            # RZ(t) = diag(exp(-it/2), exp(+it/2))
            phase = np.exp(0.5j * ((2 * bits - 1) @ np.asarray(thetas, dtype=float)))
            if len(self._phase_cache) > 256:
                self._phase_cache.clear()
            self._phase_cache[key] = phase
        if idx.size == self.shots:
            self.psi *= phase
        else:
            self.psi[idx] *= phase

    def _prob_one(self, q, idx):
        v = self._view(self.psi[idx])
        sel = [slice(None)] * (self.n + 1)
        sel[q + 1] = 1
        return (np.abs(v[tuple(sel)]) ** 2).reshape(idx.size, -1).sum(axis=1)

    def measure(self, q, mask, key):
        out = np.zeros(self.shots, dtype=bool)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return out
        p1 = self._prob_one(q, idx)
        u = self.rng.random(idx.size)
        res = u < p1
        out[idx] = res
        v = self._view(self.psi[idx])
        for val in (0, 1):
            sel = [slice(None)] * (self.n + 1)
            sel[q + 1] = 1 - val
            rows = np.flatnonzero(res == bool(val))
            if rows.size:
                sel[0] = rows
                v[tuple(sel)] = 0
        norms = np.sqrt(np.sum(np.abs(v.reshape(idx.size, -1)) ** 2, axis=1))
        self.psi[idx] = v.reshape(idx.size, -1) / norms[:, None]
        return out

    def reset(self, q, mask):
        out = self.measure(q, mask, None)
        self._apply_1q(_1Q["X"], q, mask & out)

    def norms(self) -> np.ndarray:
        return np.sum(np.abs(self.psi) ** 2, axis=1)
