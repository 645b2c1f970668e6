"""Aaronson-Gottesman (CHP) stabilizer tableau."""

from __future__ import annotations

import math

import numpy as np

from .circuit import CLIFFORD_1Q, Instruction


class NonCliffordError(ValueError):
    pass


def _g(x1, z1, x2, z2):
    # vectorised exponent of i for sigma(x1,z1) * sigma(x2,z2); inputs are int arrays
    return np.where(
        (x1 == 0) & (z1 == 0), 0,
        np.where((x1 == 1) & (z1 == 1), z2 - x2,
                 np.where(x1 == 1, z2 * (2 * x2 - 1), x2 * (1 - 2 * z2))))


def rz_quarter_turns(angle: float) -> int:
    """Number of S gates equal (up to phase) to RZ(angle); raises if not a multiple of pi/2."""
    k = angle / (math.pi / 2)
    kr = round(k)
    if abs(k - kr) > 1e-9:
        raise NonCliffordError(f"RZ({angle}) is not Clifford")
    return kr % 4


class TableauState:
    """Stabilizer state on ``n`` qubits.

    Rows ``0..n-1`` are destabilizers, rows ``n..2n-1`` stabilizers; ``r`` holds
    the sign bits.  The state starts in ``|0...0>``.
    """

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        idx = np.arange(n)
        self.x[idx, idx] = 1
        self.z[n + idx, idx] = 1

    def copy(self) -> "TableauState":
        t = TableauState.__new__(TableauState)
        t.n = self.n
        t.x = self.x.copy()
        t.z = self.z.copy()
        t.r = self.r.copy()
        return t

    # -- Clifford generators

    def h(self, a: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, a]
        self.x[:, a], self.z[:, a] = self.z[:, a].copy(), self.x[:, a].copy()

    def s(self, a: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]

    def cnot(self, a: int, b: int) -> None:
        self.r ^= self.x[:, a] & self.z[:, b] & (self.x[:, b] ^ self.z[:, a] ^ 1)
        self.x[:, b] ^= self.x[:, a]
        self.z[:, a] ^= self.z[:, b]

    def pauli(self, a: int, xbit: int, zbit: int) -> None:
        # conjugating by X flips rows with a Z component, and vice versa
        if xbit:
            self.r ^= self.z[:, a]
        if zbit:
            self.r ^= self.x[:, a]

    def apply(self, name: str, qubits, angle: float | None = None) -> None:
        a = qubits[0]
        if name == "CNOT":
            self.cnot(a, qubits[1])
        elif name == "H":
            self.h(a)
        elif name == "S":
            self.s(a)
        elif name == "Sdg":
            self.s(a)
            self.s(a)
            self.s(a)
        elif name == "X":
            self.pauli(a, 1, 0)
        elif name == "Y":
            self.pauli(a, 1, 1)
        elif name == "Z":
            self.pauli(a, 0, 1)
        elif name == "I":
            pass
        elif name == "RZ":
            for _ in range(rz_quarter_turns(angle)):
                self.s(a)
        else:
            raise NonCliffordError(f"gate {name} is not supported by the tableau backend")

    # -- measurement

    def _rowsum(self, h: int, i: int) -> None:
        x1 = self.x[i].astype(np.int64)
        z1 = self.z[i].astype(np.int64)
        x2 = self.x[h].astype(np.int64)
        z2 = self.z[h].astype(np.int64)
        tot = 2 * int(self.r[h]) + 2 * int(self.r[i]) + int(_g(x1, z1, x2, z2).sum())
        self.r[h] = 1 if tot % 4 == 2 else 0
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    def is_deterministic(self, a: int) -> bool:
        return not self.x[self.n:, a].any()

    def measure(self, a: int, rng: np.random.Generator | None = None,
                forced: int | None = None) -> int:
        """Z-measure qubit ``a`` and collapse; ``forced`` fixes a random outcome."""
        n = self.n
        hits = np.flatnonzero(self.x[n:, a]) + n
        if hits.size:
            p = int(hits[0])
            for i in np.flatnonzero(self.x[:, a]):
                if i != p:
                    self._rowsum(int(i), p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            self.x[p] = 0
            self.z[p] = 0
            self.z[p, a] = 1
            if forced is not None:
                out = int(forced)
            else:
                out = int(rng.integers(0, 2)) if rng is not None else 0
            self.r[p] = out
            return out
        # deterministic: accumulate stabilizers flagged by the destabilizers into a scratch row
        sx = np.zeros(n, dtype=np.int64)
        sz = np.zeros(n, dtype=np.int64)
        sr = 0
        for i in np.flatnonzero(self.x[:n, a]):
            row = i + n
            x1 = self.x[row].astype(np.int64)
            z1 = self.z[row].astype(np.int64)
            tot = 2 * sr + 2 * int(self.r[row]) + int(_g(x1, z1, sx, sz).sum())
            sr = 1 if tot % 4 == 2 else 0
            sx ^= x1
            sz ^= z1
        return sr

    def reset(self, a: int, rng: np.random.Generator | None = None) -> None:
        if self.measure(a, rng):
            self.pauli(a, 1, 0)

    # -- inspection

    def stabilizer_rows(self) -> list:
        from .pauli import PauliString
        n = self.n
        return [PauliString(tuple(self.x[i]), tuple(self.z[i]), 2 * int(self.r[i]))
                for i in range(n, 2 * n)]

    def expectation(self, p) -> int:
        """<p> for a Hermitian Pauli string: +1, -1 or 0."""
        from .pauli import commutes
        n = self.n
        if not all(commutes(row, p) for row in self.stabilizer_rows()):
            return 0
        # p is +-(product of stabilizer rows); the destabilizers it anticommutes with pick them
        px = np.array(p.xbits, dtype=np.int64)
        pz = np.array(p.zbits, dtype=np.int64)
        sx = np.zeros(n, dtype=np.int64)
        sz = np.zeros(n, dtype=np.int64)
        sr = 0
        for i in range(n):
            if (int(self.x[i].astype(np.int64) @ pz) + int(self.z[i].astype(np.int64) @ px)) % 2:
                row = i + n
                x1 = self.x[row].astype(np.int64)
                z1 = self.z[row].astype(np.int64)
                tot = 2 * sr + 2 * int(self.r[row]) + int(_g(x1, z1, sx, sz).sum())
                sr = 1 if tot % 4 == 2 else 0
                sx ^= x1
                sz ^= z1
        sign = (2 * sr - p.phase) % 4
        if sign == 0:
            return 1
        if sign == 2:
            return -1
        raise ValueError("non-Hermitian Pauli")

    def check_symplectic(self) -> bool:
        """Rows must satisfy the canonical symplectic relations."""
        x = self.x.astype(np.int64)
        z = self.z.astype(np.int64)
        form = (x @ z.T + z @ x.T) % 2
        n = self.n
        want = np.zeros((2 * n, 2 * n), dtype=np.int64)
        want[np.arange(n), np.arange(n) + n] = 1
        want[np.arange(n) + n, np.arange(n)] = 1
        return bool(np.array_equal(form, want))


def apply_gate(s: TableauState, ins: Instruction) -> TableauState:
    """Return a new state with a Clifford gate instruction applied."""
    if ins.gate not in CLIFFORD_1Q | {"CNOT", "RZ"}:
        raise NonCliffordError(f"gate {ins.gate} is not Clifford")
    out = s.copy()
    out.apply(ins.gate, ins.qubits, ins.angle)
    return out
