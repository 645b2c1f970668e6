import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ftqec.analysis import (PSEUDO_THRESHOLD_P2, SOURCES, BudgetModel, LogicalChannel,
                            decay_curve, find_crossing, fit_decay, fit_decay_rates,
                            fit_error_budget, fit_linear_quadratic, invert_basis_rates, jackknife,
                            jackknife_decay, pseudo_threshold_scan)

probs = st.floats(0.0, 0.2, allow_nan=False)


# ---------------------------------------------------------------- jackknife

def test_jackknife_constant_samples():
    assert jackknife([0.25] * 7) == (pytest.approx(0.25), pytest.approx(0.0, abs=1e-15))


def test_jackknife_two_samples():
    assert jackknife([0, 1]) == (pytest.approx(0.5), pytest.approx(0.5))


def test_jackknife_needs_two_samples():
    with pytest.raises(ValueError):
        jackknife([0.3])


def test_jackknife_bernoulli_oracle():
    x = np.random.default_rng(8).random(100) < 0.3
    mean, std = jackknife(x)
    binom = math.sqrt(0.3 * 0.7 / 100)
    assert abs(mean - 0.3) <= 3 * binom
    assert std == pytest.approx(binom, rel=0.2)


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=30))
def test_jackknife_of_mean_equals_standard_error(xs):
    x = np.array(xs)
    mean, std = jackknife(x)
    assert mean == pytest.approx(x.mean(), abs=1e-12)
    assert std == pytest.approx(x.std(ddof=1) / math.sqrt(len(x)), abs=1e-12)


def test_jackknife_custom_estimator():
    x = np.arange(10.0)
    m, s = jackknife(x, estimator=np.median)
    assert m == pytest.approx(4.5)
    assert s > 0


# ---------------------------------------------------------------- decay fits

@pytest.mark.parametrize("p_cycle", [0.02, 1.16e-2, 0.0, 0.3])
def test_fit_recovers_exact_curve(p_cycle):
    cycles = [1, 2, 3, 4]
    e = decay_curve(cycles, 4.9e-4, p_cycle)
    fit = fit_decay([(c, v, 1.0) for c, v in zip(cycles, e)], 4.9e-4)
    assert fit.p_cycle == pytest.approx(p_cycle, abs=1e-6)
    assert np.all(np.abs(fit.residuals) < 1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.2), st.floats(0.0, 0.05), st.lists(st.floats(0.1, 10), min_size=4,
                                                            max_size=4), st.floats(0.01, 100))
def test_fit_is_invariant_to_weight_scaling(p_cycle, p_spam, ws, k):
    rng = np.random.default_rng(int(p_cycle * 1e6))
    cycles = [1, 2, 3, 4]
    e = decay_curve(cycles, p_spam, p_cycle) + rng.normal(0, 1e-3, 4)
    a = fit_decay([(c, v, w) for c, v, w in zip(cycles, e, ws)], p_spam)
    b = fit_decay([(c, v, w * k) for c, v, w in zip(cycles, e, ws)], p_spam)
    assert a.p_cycle == pytest.approx(b.p_cycle, abs=1e-9)
    assert 0 <= a.p_cycle <= 0.5


def _iterate_channel(ch: LogicalChannel, basis: str, p_spam: float, cycles: int) -> float:
    # density-matrix iteration of the Pauli channel on the +1 eigenstate of `basis`
    I2 = np.eye(2)
    X = np.array([[0, 1], [1, 0]], complex)
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1.0 + 0j, -1.0])
    P = {"X": X, "Y": Y, "Z": Z}[basis]
    rho = (I2 + P) / 2
    for _ in range(cycles):
        rho = ((1 - ch.p_L) * rho + ch.p_x * X @ rho @ X + ch.p_y * Y @ rho @ Y
               + ch.p_z * Z @ rho @ Z)
    ok = float(np.real(np.trace(rho @ (I2 + P) / 2)))
    # a readout that errs with p_spam
    return (1 - ok) * (1 - p_spam) + ok * p_spam


@settings(max_examples=30, deadline=None)
@given(probs, probs, probs, st.sampled_from("XYZ"), st.floats(0, 0.01))
def test_channel_iteration_matches_fit_form(px, py, pz, basis, p_spam):
    ch = LogicalChannel(px, py, pz)
    rates = dict(zip("XYZ", ch.basis_rates()))
    pts = [(c, _iterate_channel(ch, basis, p_spam, c), 1.0) for c in (1, 2, 3, 4)]
    assert _iterate_channel(ch, basis, p_spam, 0) == pytest.approx(p_spam)
    fit = fit_decay(pts, p_spam)
    assert fit.p_cycle == pytest.approx(rates[basis], abs=1e-6)


def test_fit_decay_input_checks():
    with pytest.raises(ValueError):
        fit_decay([(1, 0.1, 1.0)], 0.0)
    with pytest.raises(ValueError):
        fit_decay([(1, 0.1, 1.0), (1, 0.1, 1.0)], 0.0)
    with pytest.raises(ValueError):
        fit_decay([(1, 0.1, 1.0), (2, 0.2, -1.0)], 0.0)


def test_fit_decay_rates_and_std():
    shots = 20000
    rates = {c: float(decay_curve(c, 5e-4, 0.0185)) for c in range(5)}
    stds = {c: math.sqrt(r * (1 - r) / shots) for c, r in rates.items()}
    fit = fit_decay_rates(rates, stds)
    assert fit.p_cycle == pytest.approx(0.0185, abs=1e-6)
    assert 1e-4 < fit.p_cycle_std < 1e-3


def test_jackknife_decay_exact_groups():
    groups = {c: [float(decay_curve(c, 1e-3, 0.02))] * 10 for c in range(4)}
    p, s, fit = jackknife_decay(groups)
    assert p == pytest.approx(0.02, abs=1e-6) and s == pytest.approx(0, abs=1e-6)
    with pytest.raises(ValueError):
        jackknife_decay({0: [0.0, 0.0], 1: [0.1], 2: [0.2, 0.2]})


# ---------------------------------------------------------------- logical channel

def test_symmetric_inversion():
    e = 0.01
    ch = invert_basis_rates(2 * e, 2 * e, 2 * e)
    assert (ch.p_x, ch.p_y, ch.p_z) == pytest.approx((e, e, e))
    assert ch.p_L == pytest.approx(3 * e)


def test_inversion_hand_solution():
    e = 0.02
    ch = invert_basis_rates(0.0, e, e)
    assert (ch.p_x, ch.p_y, ch.p_z) == pytest.approx((e, 0, 0), abs=1e-15)


def test_inversion_of_measured_cycle_rates():
    ch = invert_basis_rates(1.89e-2, 2.4e-2, 1.09e-2)
    assert ch.p_x == pytest.approx(8.0e-3, abs=1e-4)
    assert ch.p_y == pytest.approx(2.9e-3, abs=1e-4)
    assert ch.p_z == pytest.approx(1.6e-2, abs=1e-4)
    assert ch.p_L == pytest.approx(2.70e-2, abs=1e-4)


@given(st.fractions(0, Fraction(1, 6)), st.fractions(0, Fraction(1, 6)),
       st.fractions(0, Fraction(1, 6)))
def test_inversion_round_trip_is_exact(px, py, pz):
    ch = LogicalChannel(px, py, pz)
    back = invert_basis_rates(*ch.basis_rates())
    assert (back.p_x, back.p_y, back.p_z) == (px, py, pz)


@given(probs, probs, probs)
def test_forward_of_inverse_is_identity(a, b, c):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ch = invert_basis_rates(a, b, c)
    assert ch.basis_rates() == pytest.approx((a, b, c), abs=1e-15)


def test_negative_component_warns_and_clamps():
    with pytest.warns(RuntimeWarning):
        ch = invert_basis_rates(0.05, 0.01, 0.01)
    assert ch.p_x < 0
    assert ch.clamped().p_x == 0
    assert ch.to_dict()["p_L"] == pytest.approx(ch.p_L)


# ---------------------------------------------------------------- error budget

def _synthetic_runner(A, B):
    model = BudgetModel(np.asarray(A, float), np.asarray(B, float))
    return lambda active, s: model.predict(s, active)


def test_linear_ground_truth():
    res = fit_error_budget(_synthetic_runner([1e-3, 2e-3, 3e-3], np.zeros((3, 3))))
    assert res.model.A == pytest.approx([1e-3, 2e-3, 3e-3])
    assert np.allclose(res.model.B, 0, atol=1e-15)


def test_quadratic_single_source_fit():
    a, b = 4e-3, 7e-3
    s = [0.25, 0.5, 1.0]
    fa, fb = fit_linear_quadratic(s, [a * x + b * x * x for x in s])
    assert fa == pytest.approx(a, rel=0.01) and fb == pytest.approx(b, rel=0.01)
    with pytest.raises(ValueError):
        fit_linear_quadratic([1.0, 1.0], [0.1, 0.1])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1e-2), min_size=3, max_size=3),
       st.lists(st.floats(0, 1e-2), min_size=6, max_size=6))
def test_budget_recovers_symmetric_model(A, tri):
    B = np.zeros((3, 3))
    B[np.triu_indices(3)] = tri
    B = B + np.triu(B, 1).T
    assume(sum(A) + B.sum() > 1e-9)
    res = fit_error_budget(_synthetic_runner(A, B))
    assert np.allclose(res.model.A, A, atol=1e-12)
    assert np.allclose(res.model.B, B, atol=1e-12)
    shares = res.model.shares()
    assert set(shares) == set(SOURCES)
    assert sum(shares.values()) == pytest.approx(1.0, abs=1e-9)


def test_budget_shares_formula():
    m = BudgetModel(np.array([1.0, 2.0, 3.0]), np.array([[0, 1, 0], [1, 0, 0], [0, 0, 2.0]]))
    assert m.shares() == pytest.approx({"spam": 2 / 10, "gates": 3 / 10, "dephasing": 5 / 10})
    with pytest.raises(ValueError):
        BudgetModel(np.zeros(3), np.zeros((3, 3))).shares()


# ---------------------------------------------------------------- pseudo-threshold

def test_crossing_below_everywhere_is_bounded():
    s = [0.1, 0.3, 1.0]
    assert find_crossing(s, [x * 1e-3 for x in s]) == (1.0, "below line over the whole range")


def test_no_crossing_when_above_everywhere():
    s = [0.1, 0.3, 1.0]
    assert find_crossing(s, [0.1] * 3) == (None, "no crossing in range")


def test_crossing_of_quadratic_curve():
    # p(s) = a s + b s^2 meets s p2 exactly at s* = (p2 - a) / b
    a, b = 1e-3, 6e-3
    s = np.geomspace(0.1, 1.0, 25)
    cross, status = find_crossing(s, a * s + b * s * s)
    assert status == "crossing"
    assert cross == pytest.approx((PSEUDO_THRESHOLD_P2 - a) / b, rel=0.02)


def test_scan_reports_every_model():
    models = {"low": 1e-3, "high": 1e-2}
    out = pseudo_threshold_scan(models, [0.1, 0.5, 1.0], lambda a, s: (a * s * s, 0.0))
    assert out["high"].status == "crossing"
    assert out["low"].status == "below line over the whole range"
    assert out["low"].line == pytest.approx([s * PSEUDO_THRESHOLD_P2 for s in (0.1, 0.5, 1.0)])
    with pytest.raises(ValueError):
        pseudo_threshold_scan(models, [1.0, 0.5], lambda a, s: 0.0)
