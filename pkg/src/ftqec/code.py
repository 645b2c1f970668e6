"""The [[7,1,3]] color code and logical Pauli-frame bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .pauli import PauliString, commutes


@dataclass(frozen=True)
class CodeDefinition:
    """Stabilizer generators and logical operators of a small CSS color code.

    ``plaquettes`` and ``logical_support`` hold 0-based qubit indices; the
    bundled definition file writes them 1-based.
    """

    n_data: int
    plaquettes: tuple
    logical_support: tuple

    @property
    def x_stabilizers(self) -> tuple:
        return tuple(PauliString.on(self.n_data, "X", p) for p in self.plaquettes)

    @property
    def z_stabilizers(self) -> tuple:
        return tuple(PauliString.on(self.n_data, "Z", p) for p in self.plaquettes)

    @property
    def y_stabilizers(self) -> tuple:
        # X^4 * Z^4 on one plaquette equals +Y^4, so the sign is always +1
        return tuple(_y_on(self.n_data, p) for p in self.plaquettes)

    @property
    def stabilizers(self) -> tuple:
        return self.x_stabilizers + self.z_stabilizers

    @property
    def logical_x(self) -> PauliString:
        return PauliString.on(self.n_data, "X", self.logical_support)

    @property
    def logical_z(self) -> PauliString:
        return PauliString.on(self.n_data, "Z", self.logical_support)

    def syndrome_of(self, qubits) -> tuple:
        """Plaquette parities flipped by a same-type error on ``qubits``."""
        qs = set(qubits)
        return tuple(len(qs & set(p)) % 2 for p in self.plaquettes)

    def check(self) -> None:
        """Raise ``ValueError`` unless the generators form a valid code."""
        gens = self.stabilizers
        for i, a in enumerate(gens):
            for b in gens[i + 1:]:
                if not commutes(a, b):
                    raise ValueError(f"stabilizers {a} and {b} anticommute")
            for lg in (self.logical_x, self.logical_z):
                if not commutes(a, lg):
                    raise ValueError(f"logical {lg} anticommutes with {a}")
        if commutes(self.logical_x, self.logical_z):
            raise ValueError("logical X and Z must anticommute")


def _y_on(n: int, qubits) -> PauliString:
    return PauliString.on(n, "Y", qubits)


def parse_code(text: str) -> CodeDefinition:
    n = None
    plaquettes = []
    logical = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        try:
            vals = [int(v) for v in rest]
        except ValueError as err:
            raise ValueError(f"line {lineno}: non-integer field in {raw!r}") from err
        if key == "qubits":
            n = vals[0]
        elif key == "plaquette":
            plaquettes.append(tuple(v - 1 for v in vals))
        elif key == "logical":
            logical = tuple(v - 1 for v in vals)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    if n is None or logical is None or not plaquettes:
        raise ValueError("code definition needs 'qubits', 'plaquette' and 'logical' lines")
    for p in plaquettes + [logical]:
        if min(p) < 0 or max(p) >= n:
            raise ValueError(f"support {p} out of range for {n} qubits")
    code = CodeDefinition(n, tuple(plaquettes), logical)
    code.check()
    return code


def load_code(path: str | Path | None = None) -> CodeDefinition:
    if path is None:
        text = resources.files("ftqec.data").joinpath("steane.code").read_text()
    else:
        text = Path(path).read_text()
    return parse_code(text)


@lru_cache(maxsize=1)
def steane_code() -> CodeDefinition:
    """The bundled [[7,1,3]] definition (plaquettes {1,2,3,4}, {2,3,5,6}, {3,4,6,7})."""
    return load_code()


@dataclass(frozen=True)
class PauliFrame:
    """Pending logical correction: ``fx`` for X-bar, ``fz`` for Z-bar (``11`` is Y-bar)."""

    fx: int = 0
    fz: int = 0

    def __iter__(self):
        return iter((self.fx, self.fz))


def frame_update(pf: PauliFrame, corr_x: int, corr_z: int) -> PauliFrame:
    return PauliFrame(pf.fx ^ (corr_x & 1), pf.fz ^ (corr_z & 1))


def frame_conjugate_s(pf: PauliFrame) -> PauliFrame:
    """Push the frame through a logical S: X -> Y, Z -> Z."""
    return PauliFrame(pf.fx, pf.fz ^ pf.fx)
