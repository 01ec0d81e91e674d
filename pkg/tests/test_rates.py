import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from semiexp_ldp import rates
from semiexp_ldp._validation import DomainError, ParameterError
from semiexp_ldp.rates import RateParams, evaluate, thresholds

FIG = RateParams.of(0.5, 1.0, 2.0)
FIG_C = RateParams.of(0.5, 1.0, 2.0, 1.0)


def f_transition(p, theta, y):
    m = p.model
    return m.q * (theta * y) ** (1 - m.epsilon) + (1 - theta) ** 2 * y * y / (2 * m.sigma2)


def test_gaussian_and_max_jump_examples():
    assert evaluate("gaussian", FIG, 0).value == 0
    assert evaluate("gaussian", FIG, 1).value == 0.25
    assert evaluate("gaussian", FIG, 2).value == 1.0
    assert evaluate("max_jump", FIG, 0).value == 0
    assert evaluate("max_jump", FIG, 4).value == 2.0
    assert evaluate("max_jump", RateParams.of(0.5, 2.0, 2.0), 1).value == 2.0


def test_threshold_examples():
    th = thresholds(FIG_C)
    assert th.y0 == pytest.approx(1.8899, abs=5e-5)
    assert th.y1 == pytest.approx(2.3811, abs=5e-5)
    assert th.y3 == 2.0
    assert th.c0 == pytest.approx(2 ** (2 / 3), rel=1e-14)
    assert thresholds(FIG).y3 is None


def test_thresholds_against_f_geometry():
    # y0: smallest y at which f(., y) acquires an interior critical point.
    p = FIG
    eps = p.model.epsilon
    def has_interior_min(y):
        th = np.linspace(1e-6, 1, 200_001)
        g = np.gradient(f_transition(p, th, y), th)
        return np.any((g[:-1] < 0) & (g[1:] > 0))
    y0 = thresholds(p).y0
    assert not has_interior_min(y0 * (1 - 1e-3)) and has_interior_min(y0 * (1 + 1e-3))
    # y1: value at the interior minimum ties with the endpoint theta = 0.
    def gap(y):
        res = optimize.minimize_scalar(lambda t: f_transition(p, t, y), bounds=(eps / (1 + eps), 1), method="bounded",
                                       options={"xatol": 1e-12})
        return res.fun - y * y / (2 * p.model.sigma2)
    assert optimize.brentq(gap, 2.0, 3.0, xtol=1e-12) == pytest.approx(thresholds(p).y1, rel=1e-7)


def test_y0_below_y1_everywhere():
    rng = np.random.default_rng(0)
    for _ in range(500):
        p = RateParams.of(rng.uniform(0.01, 0.99), rng.uniform(0.1, 10), rng.uniform(0.1, 10))
        th = thresholds(p)
        assert th.y0 < th.y1


def test_theta_root_examples():
    th = rates.theta_root(FIG, 4.0)
    assert th == pytest.approx(0.8656, abs=5e-5)
    assert abs((1 - th) * math.sqrt(th) - 0.125) < 1e-12
    y0 = thresholds(FIG).y0
    assert rates.theta_root(FIG, y0 * (1 + 1e-12)) == pytest.approx(1 / 3, abs=1e-5)
    assert rates.theta_root(FIG, 1e6) > 0.999
    with pytest.raises(DomainError):
        rates.theta_root(FIG, y0)


def test_transition_examples():
    r = evaluate("transition", FIG, 1)
    assert (r.value, r.theta) == (0.25, 0.0)
    r = evaluate("transition", FIG, 4)
    assert r.value == pytest.approx(1.933, abs=5e-4)
    assert r.theta == pytest.approx(0.8656, abs=5e-5)
    assert r.value == pytest.approx(rates.rate_oracle_grid("transition", FIG, 4.0, 10_000), abs=1e-9)
    assert evaluate("transition", FIG, 0).value == 0


def test_transition_continuity_at_y1():
    y1 = thresholds(FIG).y1
    theta = rates.theta_root(FIG, y1)
    assert abs(f_transition(FIG, theta, y1) - y1 * y1 / 4) < 1e-9
    assert evaluate("transition", FIG, y1).theta == 0.0


def test_transition2_examples():
    r = evaluate("transition2", FIG_C, 2.5)
    assert r.value == pytest.approx(2 + math.sqrt(0.5), rel=1e-15)
    assert r.jumps == 2
    assert evaluate("transition2", FIG_C, 1).value == 1.0
    assert evaluate("transition2", FIG_C, 0).value == 0
    assert rates.rate_oracle_grid("transition2", FIG_C, 2.5, 1000) == pytest.approx(2.7071, abs=5e-5)


def test_trunc_max_jump_examples():
    assert evaluate("trunc_max_jump", FIG_C, 3).value == 3
    assert evaluate("trunc_max_jump", RateParams.of(0.5, 1.0, 2.0, 4.0), 2).value == 1
    assert evaluate("trunc_max_jump", FIG_C, 0).value == 0


def test_transition3_examples():
    assert evaluate("transition3", FIG_C, 1).value == 0.25
    assert evaluate("transition3", FIG_C, 4).value == 3.0
    r = evaluate("transition3", FIG_C, 2)
    assert r.value == 1.0 and r.branch == "transition3_gaussian"
    assert evaluate("transition3", FIG_C, math.nextafter(2, 3)).value == pytest.approx(1.0, abs=1e-14)


def test_t0_examples():
    th = thresholds(FIG_C)
    assert th.y01 == 2.5
    first = rates._t0_first(FIG_C, 2.5, th)
    assert first.value == pytest.approx(1.5625, rel=1e-15)
    assert 2.5**2 / 4 == 1 + 1.5**2 / 4 == 1.5625
    below = min(th.y01, th.y02) * 0.99
    for c in (1.0, 2.0):
        p = RateParams.of(0.5, 1.0, 2.0, c)
        assert evaluate("t0", p, below).value == pytest.approx(below**2 / 4, rel=1e-15)
        assert evaluate("t0", p, 0).value == 0
    assert evaluate("t0", FIG_C, 3.0).branch.startswith("t0_1")
    assert evaluate("t0", RateParams.of(0.5, 1.0, 2.0, 2.0), 3.0).branch.startswith("t0_2")


def test_t0_forms_agree_at_c0():
    p = RateParams.of(0.5, 1.0, 2.0, 2 ** (2 / 3))
    th = thresholds(p)
    # Both forms start their first saturated jump at y1.
    assert th.y01 == pytest.approx(th.y1, rel=1e-12)
    assert th.y02 == pytest.approx(th.y1, rel=1e-12)
    for y in np.linspace(0, 12, 200):
        assert abs(rates._t0_first(p, y, th).value - rates._t0_second(p, y, th).value) < 1e-8
    evaluate("t0", p, 5.0)


def test_c_required():
    with pytest.raises(ParameterError):
        evaluate("transition2", FIG, 1.0)
    with pytest.raises(ParameterError):
        evaluate("nope", FIG, 1.0)
    with pytest.raises(ParameterError):
        evaluate("gaussian", FIG, -1.0)


def test_aliases():
    assert evaluate("I2", FIG_C, 2.5).value == evaluate("transition2", FIG_C, 2.5).value


def test_oracle_zero():
    for rid in rates.RATE_IDS:
        assert rates.rate_oracle_grid(rid, FIG_C, 0.0, 50) == 0.0


def test_emit_curve_and_csv():
    rows = rates.emit_curve("gaussian", FIG, 0, 2, 3)
    assert [(r.y, r.value) for r in rows] == [(0, 0), (1, 0.25), (2, 1.0)]
    with pytest.raises(ParameterError):
        rates.emit_curve("gaussian", FIG, 1, 1, 10)
    with pytest.raises(ParameterError):
        rates.emit_curve("gaussian", FIG, 0, 1, 1)
    text = rates.curve_to_csv(rates.emit_curve("t0", FIG_C, 0, 9, 97))
    assert text.splitlines()[0] == "y,value,theta,branch,jumps"
    again = rates.curve_to_csv(rates.curve_from_csv(text))
    assert again == text


def test_nonconvex_between_cusps():
    p = RateParams.of(0.5, 1.0, 2.0, 5.0)
    y = np.linspace(0.01, 4.99, 300)
    v = rates.rate_values("transition2", p, y)
    assert np.all(np.diff(v, 2) < 0)


params_strategy = st.builds(
    RateParams.of,
    st.floats(0.1, 0.9),
    st.floats(0.5, 3.0),
    st.floats(0.5, 4.0),
    st.floats(0.3, 3.0),
)


@settings(max_examples=60, deadline=None)
@given(params_strategy, st.floats(0.0, 1.0))
def test_monotone_and_dominated(p, frac):
    y1 = thresholds(p).y1
    ys = np.linspace(0, 10 * y1, 120)
    for rid in rates.RATE_IDS:
        v = rates.rate_values(rid, p, ys)
        assert np.all(np.diff(v) >= -1e-12), rid
        assert np.all(v >= 0)
    y = 10 * y1 * frac
    m = p.model
    val = evaluate("transition", p, y).value
    assert val <= min(m.q * y ** (1 - m.epsilon), y * y / (2 * m.sigma2)) + 1e-12


@settings(max_examples=60, deadline=None)
@given(params_strategy, st.floats(1e-6, 40.0))
def test_theta_first_order_condition(p, stretch):
    y = thresholds(p).y0 * (1 + stretch)
    theta = rates.theta_root(p, y)
    assert abs(rates.first_order_residual(p, y, theta)) < 1e-10
    eps = p.model.epsilon
    assert eps / (1 + eps) <= theta <= 1


@settings(max_examples=30, deadline=None)
@given(params_strategy, st.floats(0.0, 1.0))
def test_closed_forms_match_oracle(p, frac):
    y = 10 * thresholds(p).y1 * frac
    for rid in rates.RATE_IDS:
        res = 64 if rid in ("transition2", "t0") else 1000
        assert abs(evaluate(rid, p, y).value - rates.rate_oracle_grid(rid, p, y, res)) < 1e-8, rid
