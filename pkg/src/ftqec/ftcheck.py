"""Exhaustive single-fault injection through preparation, QEC cycles and an ideal readout."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, TimingTable
from .noise import enumerate_single_faults, noiseless
from .protocol import (INIT_STATES, NATURAL_BASIS, BuildOptions, expected_bit,
                       logical_meas, memory_circuit)
from .runtime import run_batch

_ROTATION_SLICES = {"Z": 0, "X": 1, "Y": 2}


def injection_sites(c: Circuit, basis: str) -> list:
    """Single faults of ``c`` excluding the final rotation and readout (ideal decode)."""
    stop = len(c.slices) - 1 - _ROTATION_SLICES[basis]
    return [f for f in enumerate_single_faults(c, include_dephasing=True,
                                               timing=TimingTable(transport=1.0))
            if f.slice < stop]


@dataclass
class InjectionReport:
    total: int = 0
    failures: list = field(default_factory=list)   # (init_state, Fault)
    per_state: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        return f"{len(self.failures)} logical failures / {self.total} faults"


def inject_all(opts: BuildOptions | None = None, states=INIT_STATES, cycles: int = 1,
               backend: str = "frame", stop_early: bool = False) -> InjectionReport:
    """Replay every single fault (one per shot) through prep + ``cycles`` cycles
    with a noiseless readout and decode; collect the faults that flip the result."""
    opts = opts or BuildOptions()
    rep = InjectionReport()
    for st in states:
        basis = NATURAL_BASIS[st]
        c = memory_circuit(st, cycles, basis, opts)
        sites = injection_sites(c, basis)
        res = run_batch(c, noiseless(), len(sites), seed=0, backend=backend,
                        faults=[[f] for f in sites])
        out = np.atleast_1d(logical_meas(res.reg("data"), basis, res.reg("last_x"),
                                         res.reg("last_z"), res.reg("pf")))
        bad = np.flatnonzero(out != expected_bit(st, basis))
        rep.total += len(sites)
        rep.per_state[st] = (len(sites), len(bad))
        rep.failures.extend((st, sites[i]) for i in bad)
        if stop_early and len(bad):
            break
    return rep
