"""Statistics and model fitting for logical error-rate data.

Everything here works on aggregated numbers (rates, weights, callables that
return rates), so it can be tested on synthetic data without running any
circuits.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

log = logging.getLogger(__name__)

SOURCES = ("spam", "gates", "dephasing")
PSEUDO_THRESHOLD_P2 = 3.1e-3


# ---------------------------------------------------------------- jackknife

def jackknife(samples, estimator: Callable | None = None) -> tuple:
    """Leave-one-out jackknife of ``estimator`` (default: the mean).

    Returns ``(estimate, standard_error)`` where the estimate is the average
    of the leave-one-out values.
    """
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("jackknife needs at least 2 samples")
    if estimator is None:
        loo = (x.sum() - x) / (n - 1)
    else:
        loo = np.array([estimator(np.delete(x, i)) for i in range(n)], dtype=float)
    mean = float(loo.mean())
    std = float(math.sqrt((n - 1) / n * np.sum((loo - mean) ** 2)))
    return mean, std


# ---------------------------------------------------------------- decay fit

def decay_curve(cycles, p_spam: float, p_cycle: float):
    """p_L(c) = 1/2 + (p_spam - 1/2) (1 - 2 p_cycle)^c."""
    c = np.asarray(cycles, dtype=float)
    return 0.5 + (p_spam - 0.5) * (1.0 - 2.0 * p_cycle) ** c


@dataclass
class DecayFit:
    p_spam: float
    p_cycle: float
    residuals: np.ndarray = field(repr=False)
    p_cycle_std: float = float("nan")

    def predict(self, cycles):
        return decay_curve(cycles, self.p_spam, self.p_cycle)

    def to_dict(self) -> dict:
        return {"p_spam": self.p_spam, "p_cycle": self.p_cycle, "p_cycle_std": self.p_cycle_std,
                "residuals": [float(r) for r in self.residuals]}


def fit_decay(points: Sequence[tuple], p_spam: float) -> DecayFit:
    """Weighted least-squares fit of ``p_cycle`` with ``p_spam`` held fixed.

    ``points`` are ``(cycles, error_rate, weight)`` triples; weights are
    usually inverse variances.  ``p_cycle_std`` is the curvature estimate
    ``1/sqrt(sum w (dp_L/dp_cycle)^2)``, which is meaningful only when the
    weights are inverse variances.
    """
    pts = [(float(c), float(e), float(w)) for c, e, w in points]
    if any(w < 0 for *_, w in pts):
        raise ValueError("weights must be non-negative")
    used = [(c, e, w) for c, e, w in pts if c >= 1 and w > 0]
    if len({c for c, _, _ in used}) < 2:
        raise ValueError("decay fit needs at least 2 distinct cycle counts >= 1 with positive weight")
    if not 0 <= p_spam < 0.5:
        raise ValueError(f"p_spam must lie in [0, 0.5), got {p_spam}")
    c = np.array([p[0] for p in used])
    e = np.array([p[1] for p in used])
    w = np.array([p[2] for p in used])
    w = w / w.sum()   # scale invariance of the estimate

    def loss(p):
        return float(np.sum(w * (decay_curve(c, p_spam, p) - e) ** 2))

    res = minimize_scalar(loss, bounds=(0.0, 0.5), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 500})
    p = float(res.x)
    # the bounded search never returns the exact endpoint; snap when the edge is better
    for edge in (0.0, 0.5):
        if loss(edge) <= loss(p):
            p = edge
    resid = np.array([e_ - float(decay_curve(c_, p_spam, p)) for c_, e_, _ in pts])
    # dp_L/dp = -2 c (p_spam - 1/2)(1 - 2p)^(c-1), with the original (unnormalised) weights
    w_raw = np.array([p_[2] for p_ in used])
    deriv = -2.0 * c * (p_spam - 0.5) * (1.0 - 2.0 * p) ** np.maximum(c - 1.0, 0.0)
    info = float(np.sum(w_raw * deriv ** 2))
    std = 1.0 / math.sqrt(info) if info > 0 else float("nan")
    return DecayFit(p_spam, p, resid, std)


def fit_decay_rates(rates: Mapping[int, float], stds: Mapping[int, float] | None = None,
                    shots: Mapping[int, int] | None = None) -> DecayFit:
    """Fit from per-cycle error rates, taking ``p_spam`` from cycle 0.

    Weights are ``1/std^2``; a zero std (no failures seen) falls back to the
    binomial variance of one failure in ``shots`` so those points keep a
    finite weight.
    """
    if 0 not in rates:
        raise ValueError("cycle-0 rate needed to fix p_spam")
    pts = []
    for c, r in sorted(rates.items()):
        if c == 0:
            continue
        s = None if stds is None else stds.get(c)
        if s is None or s <= 0:
            n = (shots or {}).get(c)
            s = math.sqrt(max(r * (1 - r), 1.0 / n) / n) if n else 1.0
        pts.append((c, r, 1.0 / s ** 2))
    return fit_decay(pts, min(rates[0], 0.5 - 1e-12))


def jackknife_decay(group_rates: Mapping[int, Sequence[float]]) -> tuple:
    """Delete-one-group jackknife of ``p_cycle``.

    ``group_rates[c]`` holds equal-size per-group error rates at ``c``
    cycles (same group count for every ``c``).  Each replicate drops group
    ``j`` at every cycle count, refixes ``p_spam`` from the remaining
    cycle-0 groups and refits with uniform weights.  Returns
    ``(estimate, std, full_fit)``.
    """
    arrs = {c: np.asarray(v, dtype=float) for c, v in group_rates.items()}
    sizes = {len(v) for v in arrs.values()}
    if len(sizes) != 1:
        raise ValueError("every cycle count needs the same number of groups")
    g = sizes.pop()

    def fit_from(means):
        pts = [(c, m, 1.0) for c, m in means.items() if c != 0]
        return fit_decay(pts, min(means[0], 0.5 - 1e-12))

    full = fit_from({c: float(v.mean()) for c, v in arrs.items()})
    reps = [fit_from({c: float(np.delete(v, j).mean()) for c, v in arrs.items()}).p_cycle
            for j in range(g)]
    if g < 2:
        raise ValueError("jackknife needs at least 2 groups")
    std = math.sqrt((g - 1) / g * float(np.sum((np.array(reps) - np.mean(reps)) ** 2)))
    return full.p_cycle, std, full


# ---------------------------------------------------------------- logical channel

@dataclass(frozen=True)
class LogicalChannel:
    """Pauli channel rho -> (1 - p_L) rho + p_x X rho X + p_y Y rho Y + p_z Z rho Z."""

    p_x: float
    p_y: float
    p_z: float

    @property
    def p_L(self):
        return self.p_x + self.p_y + self.p_z

    def basis_rates(self) -> tuple:
        """(p_yz, p_xz, p_xy): the error rates seen in the X, Y and Z readouts."""
        return (self.p_y + self.p_z, self.p_x + self.p_z, self.p_x + self.p_y)

    def clamped(self) -> "LogicalChannel":
        return LogicalChannel(max(self.p_x, 0), max(self.p_y, 0), max(self.p_z, 0))

    def to_dict(self) -> dict:
        return {"p_x": float(self.p_x), "p_y": float(self.p_y), "p_z": float(self.p_z),
                "p_L": float(self.p_L)}


def invert_basis_rates(p_yz, p_xz, p_xy) -> LogicalChannel:
    """Recover (p_x, p_y, p_z) from the three basis error rates.

    Arithmetic stays in the input number type, so ``fractions.Fraction``
    inputs round-trip exactly.  Negative components (statistical noise) are
    returned as they are, with a warning.
    """
    ch = LogicalChannel((p_xz + p_xy - p_yz) / 2, (p_yz + p_xy - p_xz) / 2,
                        (p_yz + p_xz - p_xy) / 2)
    neg = [n for n, v in zip("xyz", (ch.p_x, ch.p_y, ch.p_z)) if v < 0]
    if neg:
        warnings.warn(f"negative channel component(s) p_{','.join(neg)} from basis rates "
                      f"({p_yz}, {p_xz}, {p_xy})", RuntimeWarning, stacklevel=2)
    return ch


# ---------------------------------------------------------------- error budget

@dataclass
class BudgetModel:
    """p_L(s) = s * sum_i A_i + s^2 * sum_ij B_ij over the sources in :data:`SOURCES`."""

    A: np.ndarray
    B: np.ndarray
    sources: tuple = SOURCES

    def predict(self, s: float, active: Sequence[bool] | None = None) -> float:
        m = np.ones(len(self.A), bool) if active is None else np.asarray(active, bool)
        return float(s * self.A[m].sum() + s * s * self.B[np.ix_(m, m)].sum())

    def contributions(self) -> np.ndarray:
        return self.A + self.B.sum(axis=1)

    def shares(self) -> dict:
        c = self.contributions()
        tot = c.sum()
        if tot == 0:
            raise ValueError("zero total logical error; shares undefined")
        return {name: float(v / tot) for name, v in zip(self.sources, c)}

    def to_dict(self) -> dict:
        return {"sources": list(self.sources), "A": self.A.tolist(), "B": self.B.tolist(),
                "shares": self.shares()}


def fit_linear_quadratic(scales, values, stds=None) -> tuple:
    """Weighted least squares of ``v = a s + b s^2`` (no constant term)."""
    s = np.asarray(scales, float)
    v = np.asarray(values, float)
    if len(s) < 2 or len(set(s.tolist())) < 2:
        raise ValueError("need at least 2 distinct scales for a quadratic fit")
    w = np.ones_like(s) if stds is None else 1.0 / np.maximum(np.asarray(stds, float), 1e-300)
    X = np.stack([s, s * s], axis=1) * w[:, None]
    coef, *_ = np.linalg.lstsq(X, v * w, rcond=None)
    return float(coef[0]), float(coef[1])


@dataclass
class BudgetResult:
    model: BudgetModel
    single: dict      # source -> list of (s, p_L, std)
    pairs: dict       # (i, j) -> (p_L, std)

    def to_dict(self) -> dict:
        d = self.model.to_dict()
        d["single_source_runs"] = {k: [list(map(float, r)) for r in v] for k, v in self.single.items()}
        d["pair_runs"] = {f"{self.model.sources[i]}+{self.model.sources[j]}": list(map(float, v))
                          for (i, j), v in self.pairs.items()}
        return d


def _value_std(r) -> tuple:
    if isinstance(r, tuple):
        return float(r[0]), float(r[1])
    return float(r), float("nan")


def fit_error_budget(runner: Callable, scales: Sequence[float] = (0.25, 0.5, 1.0),
                     weighted: bool = False) -> BudgetResult:
    """Fit the quadratic budget model from masked, scaled simulations.

    ``runner(active, s)`` returns the logical error rate (or ``(rate, std)``)
    with only the sources flagged in ``active`` switched on and every rate
    multiplied by ``s``.  A_i and B_ii come from single-source fits over
    ``scales``; B_ij (i != j) from runs at s = 1 with the third source off,
    split evenly between B_ij and B_ji.
    """
    n = len(SOURCES)
    A = np.zeros(n)
    B = np.zeros((n, n))
    single = {}
    for i, name in enumerate(SOURCES):
        act = tuple(k == i for k in range(n))
        rows = [(s, *_value_std(runner(act, s))) for s in scales]
        single[name] = rows
        stds = [r[2] for r in rows] if weighted and all(r[2] > 0 for r in rows) else None
        A[i], B[i, i] = fit_linear_quadratic([r[0] for r in rows], [r[1] for r in rows], stds)
    pairs = {}
    for i in range(n):
        for j in range(i + 1, n):
            act = tuple(k in (i, j) for k in range(n))
            v, sd = _value_std(runner(act, 1.0))
            pairs[(i, j)] = (v, sd)
            B[i, j] = B[j, i] = (v - A[i] - A[j] - B[i, i] - B[j, j]) / 2
    return BudgetResult(BudgetModel(A, B), single, pairs)


# ---------------------------------------------------------------- pseudo-threshold

@dataclass
class ThresholdCurve:
    name: str
    scales: list
    p_L: list
    stds: list
    line: list
    crossing: float | None
    status: str     # "crossing", "no crossing in range", "below line over the whole range"

    def to_dict(self) -> dict:
        return {"name": self.name, "scales": self.scales, "p_L": self.p_L, "std": self.stds,
                "line": self.line, "crossing": self.crossing, "status": self.status}


def find_crossing(scales, p_L, p2: float = PSEUDO_THRESHOLD_P2) -> tuple:
    """Largest s where ``p_L`` passes from below to above ``s * p2``.

    Interpolates linearly in (log s, log p_L - log(s p2)).  When the curve is
    below the line at every probed scale the largest scale is returned as a
    lower bound.
    """
    s = np.asarray(scales, float)
    if np.any(np.diff(s) <= 0):
        raise ValueError("scales must be strictly increasing")
    v = np.asarray(p_L, float)
    with np.errstate(divide="ignore"):
        g = np.log(np.maximum(v, 1e-300)) - np.log(s * p2)
    below = g < 0
    if below.all():
        return float(s[-1]), "below line over the whole range"
    if not below.any():
        return None, "no crossing in range"
    idx = [k for k in range(len(s) - 1) if g[k] < 0 <= g[k + 1]]
    if not idx:
        # below only at the top end: the curve dips under the line as s grows
        return None, "no crossing in range"
    k = idx[-1]
    ls = np.log(s[k]) + (np.log(s[k + 1]) - np.log(s[k])) * (-g[k]) / (g[k + 1] - g[k])
    return float(np.exp(ls)), "crossing"


def pseudo_threshold_scan(models: Mapping[str, object], scales: Sequence[float],
                          runner: Callable, p2: float = PSEUDO_THRESHOLD_P2) -> dict:
    """Run ``runner(model, s)`` over ``scales`` for each model and locate the
    crossing with the line ``s * p2``."""
    scales = [float(s) for s in scales]
    if sorted(scales) != scales:
        raise ValueError("scales must be sorted")
    out = {}
    for name, nm in models.items():
        vals = [_value_std(runner(nm, s)) for s in scales]
        ps = [v for v, _ in vals]
        cross, status = find_crossing(scales, ps, p2)
        out[name] = ThresholdCurve(name, scales, ps, [sd for _, sd in vals],
                                   [s * p2 for s in scales], cross, status)
        log.info("%s: %s %s", name, status, "" if cross is None else f"s={cross:.3g}")
    return out


__all__ = [
    "jackknife", "decay_curve", "DecayFit", "fit_decay", "fit_decay_rates", "jackknife_decay",
    "LogicalChannel", "invert_basis_rates", "BudgetModel", "BudgetResult", "fit_error_budget",
    "fit_linear_quadratic", "ThresholdCurve", "find_crossing", "pseudo_threshold_scan",
    "SOURCES", "PSEUDO_THRESHOLD_P2",
]
