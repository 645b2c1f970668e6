"""Signed Pauli strings in binary symplectic form.

A :class:`PauliString` on ``n`` qubits is ``i**phase * P_0 (x) P_1 (x) ...`` where
each ``P_j`` is chosen from ``{I, X, Y, Z}`` by ``(xbits[j], zbits[j])`` with
``(1, 1) -> Y``.  Qubits are indexed from 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_LABELS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LABELS.items()}
_PHASE_TEXT = {0: "+", 1: "+i", 2: "-", 3: "-i"}


def _g(x1: int, z1: int, x2: int, z2: int) -> int:
    # exponent of i picked up by sigma(x1,z1) * sigma(x2,z2)
    if x1 == 0 and z1 == 0:
        return 0
    if x1 == 1 and z1 == 1:
        return z2 - x2
    if x1 == 1:
        return z2 * (2 * x2 - 1)
    return x2 * (1 - 2 * z2)


@dataclass(frozen=True)
class PauliString:
    xbits: tuple
    zbits: tuple
    phase: int = 0

    def __post_init__(self):
        if len(self.xbits) != len(self.zbits):
            raise ValueError("xbits and zbits must have equal length")
        object.__setattr__(self, "xbits", tuple(int(b) & 1 for b in self.xbits))
        object.__setattr__(self, "zbits", tuple(int(b) & 1 for b in self.zbits))
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self) -> int:
        return len(self.xbits)

    @property
    def weight(self) -> int:
        return sum(1 for x, z in zip(self.xbits, self.zbits) if x or z)

    @property
    def support(self) -> tuple:
        return tuple(j for j, (x, z) in enumerate(zip(self.xbits, self.zbits)) if x or z)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls((0,) * n, (0,) * n)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse ``"+XIZ"``, ``"-iYY"`` or ``"XX"``."""
        phase = 0
        text = label.strip()
        for prefix, k in (("+i", 1), ("-i", 3), ("+", 0), ("-", 2), ("i", 1)):
            if text.startswith(prefix):
                phase = k
                text = text[len(prefix):]
                break
        try:
            bits = [_BITS[c] for c in text.upper()]
        except KeyError as err:
            raise ValueError(f"bad Pauli label {label!r}") from err
        return cls(tuple(b[0] for b in bits), tuple(b[1] for b in bits), phase)

    @classmethod
    def on(cls, n: int, kind: str, qubits: Iterable[int]) -> "PauliString":
        """Single Pauli type ``kind`` on the given 0-based qubits."""
        x, z = _BITS[kind.upper()]
        xb = [0] * n
        zb = [0] * n
        for q in qubits:
            xb[q] = x
            zb[q] = z
        return cls(tuple(xb), tuple(zb))

    def label(self) -> str:
        return _PHASE_TEXT[self.phase] + "".join(
            _LABELS[(x, z)] for x, z in zip(self.xbits, self.zbits)
        )

    def __str__(self) -> str:
        return self.label()

    def __mul__(self, other: "PauliString") -> "PauliString":
        return pauli_mul(self, other)

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix, qubit 0 is the leftmost tensor factor."""
        single = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.array([[1j ** self.phase]], dtype=complex)
        for x, z in zip(self.xbits, self.zbits):
            out = np.kron(out, single[_LABELS[(x, z)]])
        return out


def _check_sizes(p: PauliString, q: PauliString) -> None:
    if p.n != q.n:
        raise ValueError(f"size mismatch: {p.n} vs {q.n} qubits")


def pauli_mul(p: PauliString, q: PauliString) -> PauliString:
    """Return the product ``p * q`` with its exact phase."""
    _check_sizes(p, q)
    phase = p.phase + q.phase
    for x1, z1, x2, z2 in zip(p.xbits, p.zbits, q.xbits, q.zbits):
        phase += _g(x1, z1, x2, z2)
    xb = tuple(a ^ b for a, b in zip(p.xbits, q.xbits))
    zb = tuple(a ^ b for a, b in zip(p.zbits, q.zbits))
    return PauliString(xb, zb, phase)


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff the symplectic product of ``p`` and ``q`` is even."""
    _check_sizes(p, q)
    s = 0
    for x1, z1, x2, z2 in zip(p.xbits, p.zbits, q.xbits, q.zbits):
        s ^= (x1 & z2) ^ (z1 & x2)
    return s == 0


def product(paulis: Sequence[PauliString]) -> PauliString:
    if not paulis:
        raise ValueError("empty product")
    out = paulis[0]
    for p in paulis[1:]:
        out = pauli_mul(out, p)
    return out
