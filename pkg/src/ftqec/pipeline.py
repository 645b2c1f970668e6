"""Experiment orchestration shared by the command line and the acceptance suite.

Each function runs a family of memory experiments with seeds derived from one
master seed and returns plain data plus fits from :mod:`ftqec.analysis`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analysis import (BudgetResult, LogicalChannel, fit_decay, fit_error_budget,
                       invert_basis_rates, pseudo_threshold_scan)
from .noise import NoiseModel
from .protocol import INIT_STATES, ExperimentConfig, run_memory_experiment

log = logging.getLogger(__name__)

BASES = ("X", "Y", "Z")
BASIS_STATES = {"X": ("|+>", "|->"), "Y": ("|+i>", "|-i>"), "Z": ("|0>", "|1>")}
BASIS_RATE_NAME = {"X": "p_yz", "Y": "p_xz", "Z": "p_xy"}


def derive_seed(master: int, *keys: int) -> int:
    """Stable 63-bit seed for one experiment of a family."""
    return int(np.random.SeedSequence([int(master), *map(int, keys)]).generate_state(2, np.uint64)[0]
               >> np.uint64(1))


# ---------------------------------------------------------------- memory grid

@dataclass
class MemoryGrid:
    """Error counts for every (state, cycles) pair plus jackknifed decay fits."""

    cycles: tuple
    runs: dict                       # (state, cycles) -> RunSummary
    groups: int = 10
    fits: dict = field(default_factory=dict)   # name -> (p_cycle, std)
    p_spam: dict = field(default_factory=dict)

    def rate(self, state, c) -> float:
        return self.runs[(state, c)].error_rate

    def rows(self) -> list:
        out = []
        for (st, c), r in sorted(self.runs.items(), key=lambda kv: (INIT_STATES.index(kv[0][0]),
                                                                      kv[0][1])):
            mean, std = r.jackknife()
            out.append({"state": st, "cycles": c, "shots": r.shots, "failures": r.failures,
                        "mean": mean, "jackknife_std": std})
        return out

    @property
    def states(self) -> tuple:
        return tuple(s for s in INIT_STATES if (s, self.cycles[0]) in self.runs)

    def channel(self) -> LogicalChannel:
        return invert_basis_rates(*(self.fits[f"basis {b}"][0] for b in BASES))

    def to_dict(self) -> dict:
        d = {"cycles": list(self.cycles), "groups": self.groups,
             "p_cycle": {k: {"value": v, "std": s} for k, v_s in self.fits.items()
                         for v, s in [v_s]},
             "p_spam": self.p_spam}
        if all(f"basis {b}" in self.fits for b in BASES):
            d["channel"] = self.channel().to_dict()
        return d


def _fit_all(rate: Callable, states, cycles, weights) -> tuple:
    """Fits for every state, for each basis (both states pooled) and their average."""
    fits, spam = {}, {}
    nz = [c for c in cycles if c >= 1]

    def one(name, rates_by_c):
        p0 = min(rates_by_c[0], 0.5 - 1e-12)
        spam[name] = p0
        pts = [(c, rates_by_c[c], weights[name][c]) for c in nz]
        fits[name] = fit_decay(pts, p0).p_cycle

    for st in states:
        one(st, {c: rate(st, c) for c in cycles})
    basis_names = []
    for b in BASES:
        pair = [s for s in BASIS_STATES[b] if s in states]
        if len(pair) == 2:
            one(f"basis {b}", {c: 0.5 * (rate(pair[0], c) + rate(pair[1], c)) for c in cycles})
            basis_names.append(f"basis {b}")
    if basis_names:
        fits["average"] = float(np.mean([fits[n] for n in basis_names]))
        spam["average"] = float(np.mean([spam[n] for n in basis_names]))
    return fits, spam


def run_memory_grid(noise: NoiseModel, cycles: Sequence[int] = (0, 1, 2, 3, 4), shots: int = 20000,
                    seed: int = 0, states: Sequence[str] = INIT_STATES, backend: str = "frame",
                    groups: int = 10, workers: int = 1, timing=None, progress=None) -> MemoryGrid:
    """Run every state at every cycle count and fit the decay curves.

    Uncertainties come from a delete-one-group jackknife: shots of every run
    are split into ``groups`` consecutive chunks and replicate ``j`` drops
    chunk ``j`` of every run before refitting everything.
    """
    cycles = tuple(sorted(set(int(c) for c in cycles)))
    if 0 not in cycles or len([c for c in cycles if c >= 1]) < 2:
        raise ValueError("the grid needs cycle 0 and at least two cycle counts >= 1")
    runs = {}
    for si, st in enumerate(states):
        for c in cycles:
            cfg = ExperimentConfig(st, None, c, shots, backend, noise, derive_seed(seed, si, c),
                                   timing=timing, workers=workers, groups=groups)
            runs[(st, c)] = run_memory_experiment(cfg)
            if progress:
                progress(runs[(st, c)])
    grid = MemoryGrid(cycles, runs, groups)

    # inverse-variance weights from the pooled data, held fixed across replicates
    def var(rates, n):
        p = max(float(np.mean(rates)), 1.0 / n)
        return p * (1 - p) / n

    weights = {}
    for st in states:
        weights[st] = {c: 1.0 / var([grid.rate(st, c)], shots) for c in cycles}
    for b in BASES:
        pair = BASIS_STATES[b]
        if all(s in states for s in pair):
            weights[f"basis {b}"] = {c: 2.0 / var([grid.rate(s, c) for s in pair], shots)
                                     for c in cycles}
    full, spam = _fit_all(grid.rate, states, cycles, weights)
    g_rates = {k: r.group_rates(groups) for k, r in runs.items()}
    reps = []
    for j in range(groups):
        reps.append(_fit_all(lambda st, c: float(np.delete(g_rates[(st, c)], j).mean()),
                             states, cycles, weights)[0])
    for name, val in full.items():
        r = np.array([rep[name] for rep in reps])
        std = math.sqrt((groups - 1) / groups * float(np.sum((r - r.mean()) ** 2)))
        grid.fits[name] = (float(val), std)
    grid.p_spam = spam
    return grid


def spam_estimate(noise: NoiseModel, shots: int, seed: int = 0, states=INIT_STATES,
                  backend: str = "frame", groups: int = 10, workers: int = 1) -> dict:
    """Zero-cycle logical error per state and averaged, with jackknife stds."""
    out = {}
    grp = []
    for si, st in enumerate(states):
        r = run_memory_experiment(ExperimentConfig(st, None, 0, shots, backend, noise,
                                                   derive_seed(seed, si, 0), workers=workers,
                                                   groups=groups))
        mean, std = r.jackknife()
        out[st] = (r.error_rate, std)
        grp.append(r.group_rates(groups))
    avg = np.mean(grp, axis=0)
    g = len(avg)
    loo = (avg.sum() - avg) / (g - 1)
    out["average"] = (float(np.mean([out[s][0] for s in states])),
                      math.sqrt((g - 1) / g * float(np.sum((loo - loo.mean()) ** 2))))
    for b in BASES:
        pair = BASIS_STATES[b]
        if all(s in states for s in pair):
            out[f"basis {b}"] = (0.5 * (out[pair[0]][0] + out[pair[1]][0]),
                                 0.5 * math.hypot(out[pair[0]][1], out[pair[1]][1]))
    return out


# ---------------------------------------------------------------- per-cycle runner

def cycle_error(noise: NoiseModel, shots: int, seed: int = 0, states=INIT_STATES,
                backend: str = "frame", groups: int = 10, workers: int = 1, timing=None) -> tuple:
    """Logical error per QEC cycle from zero- and one-cycle runs.

    With p_spam from the zero-cycle runs, one cycle of the decay curve
    inverts to p_cycle = (p_1 - p_spam) / (1 - 2 p_spam).  Rates are
    averaged over ``states``; the std is a delete-one-group jackknife.
    """
    g0, g1 = [], []
    for si, st in enumerate(states):
        for c, acc in ((0, g0), (1, g1)):
            r = run_memory_experiment(ExperimentConfig(st, None, c, shots, backend, noise,
                                                       derive_seed(seed, si, c), timing=timing,
                                                       workers=workers, groups=groups))
            acc.append(r.group_rates(groups))
    a0 = np.mean(g0, axis=0)
    a1 = np.mean(g1, axis=0)

    def est(p0, p1):
        return (p1 - p0) / (1 - 2 * p0)

    full = est(a0.mean(), a1.mean())
    g = len(a0)
    reps = np.array([est(np.delete(a0, j).mean(), np.delete(a1, j).mean()) for j in range(g)])
    std = math.sqrt((g - 1) / g * float(np.sum((reps - reps.mean()) ** 2)))
    return float(full), std


def budget_runner(noise: NoiseModel, shots: int, seed: int = 0, **kw) -> Callable:
    """``runner(active, s)`` for :func:`ftqec.analysis.fit_error_budget`."""
    def run(active, s):
        spam, gates, deph = active
        nm = noise.masked(spam=spam, gates=gates, dephasing=deph).with_scale(s)
        key = int(spam) * 4 + int(gates) * 2 + int(deph)
        return cycle_error(nm, shots, derive_seed(seed, key, int(round(s * 1000))), **kw)
    return run


def error_budget(noise: NoiseModel, shots: int, seed: int = 0,
                 scales=(0.25, 0.5, 1.0), **kw) -> BudgetResult:
    return fit_error_budget(budget_runner(noise, shots, seed, **kw), scales)


def threshold_scan(models: dict, scales, shots: int, seed: int = 0, **kw) -> dict:
    def run(nm, s):
        return cycle_error(nm.with_scale(s), shots, derive_seed(seed, int(round(s * 1000))), **kw)
    return pseudo_threshold_scan(models, scales, run)


__all__ = ["MemoryGrid", "run_memory_grid", "spam_estimate", "cycle_error", "budget_runner",
           "error_budget", "threshold_scan", "derive_seed", "BASES", "BASIS_STATES",
           "BASIS_RATE_NAME"]
