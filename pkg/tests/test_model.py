import math

import numpy as np
import pytest
from scipy import integrate, special

from semiexp_ldp._lattice import LatticeDist
from semiexp_ldp._validation import ParameterError
from semiexp_ldp.model import (
    ModelParams,
    SemiexpFamily,
    TruncationParams,
    audit_assumptions,
    family_from_dict,
    family_to_dict,
    moments,
    sample_base,
    sample_truncated,
    tail_log_prob,
    weibull_magnitude,
)


@pytest.fixture
def one_sided():
    return SemiexpFamily.weibull("one_sided_centered", 0.5, 1.0)


@pytest.fixture
def symmetric():
    return SemiexpFamily.weibull("symmetric", 0.5, 1.0)


@pytest.fixture
def two_point():
    return SemiexpFamily.from_lattice(LatticeDist.two_point())


def test_params_validation():
    with pytest.raises(ParameterError):
        ModelParams(1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        ModelParams(0.5, -1.0, 1.0)
    with pytest.raises(ParameterError):
        ModelParams(0.5, 1.0, 1.0, gamma=1.5)
    with pytest.raises(ParameterError):
        TruncationParams(0.0, 1.0)
    with pytest.raises(ParameterError):
        TruncationParams(1.0, 1.0, n_index=0)


def test_sigma2_must_match_family():
    with pytest.raises(ParameterError):
        SemiexpFamily("symmetric", ModelParams(0.5, 1.0, 1.0))


def test_inverse_transform_examples():
    assert weibull_magnitude(math.exp(-1), 1.0, 0.5) == pytest.approx(1.0, rel=1e-15)
    assert weibull_magnitude(math.exp(-4), 1.0, 0.5) == pytest.approx(16.0, rel=1e-15)


def test_one_sided_moments_closed_form_and_quadrature(one_sided):
    assert one_sided.shift == pytest.approx(2.0, rel=1e-14)
    assert one_sided.params.sigma2 == pytest.approx(20.0, rel=1e-14)
    # Independent check: E[W^2] = integral of 2 t P(W >= t) dt.
    ew2, _ = integrate.quad(lambda t: 2 * t * math.exp(-math.sqrt(t)), 0, np.inf, epsabs=1e-12)
    assert ew2 - 4.0 == pytest.approx(20.0, rel=1e-9)
    assert moments(one_sided).variance == pytest.approx(20.0, rel=1e-14)


def test_symmetric_variance(symmetric):
    assert symmetric.params.sigma2 == pytest.approx(special.gamma(5), rel=1e-14)


def test_sampler_moments(one_sided, symmetric):
    x = sample_base(one_sided, 3, 400_000)
    assert abs(x.mean()) < 3 * math.sqrt(20 / x.size)
    s = sample_base(symmetric, 3, 400_000)
    assert abs(s.mean()) < 3 * math.sqrt(24 / s.size)
    assert np.mean(s > 0) == pytest.approx(0.5, abs=3 * 0.5 / math.sqrt(s.size))


def test_sampler_is_deterministic(symmetric):
    a = sample_base(symmetric, 99, 70_000)
    b = sample_base(symmetric, 99, 70_000)
    assert np.array_equal(a, b)
    assert np.array_equal(sample_base(symmetric, 99, 10), a[:10])
    assert not np.array_equal(sample_base(symmetric, 100, 10), a[:10])


def test_sampler_tail_matches_formula(one_sided):
    x = sample_base(one_sided, 5, 500_000) + one_sided.shift
    for t in (1.0, 4.0, 16.0):
        p = math.exp(-math.sqrt(t))
        assert np.mean(x >= t) == pytest.approx(p, abs=4 * math.sqrt(p * (1 - p) / x.size))


def test_truncated_sampler(symmetric, one_sided):
    x = sample_truncated(symmetric, TruncationParams(1.0, 1.0), 1, 1, 50_000)
    assert x.max() < 1.0
    big = TruncationParams(1.0, 1e9)
    assert np.array_equal(sample_truncated(symmetric, big, 1, 4, 1000), sample_base(symmetric, 4, 1000))
    trunc = TruncationParams(1.0, 16.0)
    y = sample_truncated(one_sided, trunc, 1, 8, 10**6)
    mom = moments(one_sided, trunc, 1)
    assert abs(y.mean() - mom.mean) < 3 * math.sqrt(mom.variance / y.size)


def test_truncated_mean_by_direct_quadrature(one_sided):
    cutoff = 16.0
    w_hi = cutoff + 2.0
    dens = lambda w: math.exp(-math.sqrt(w)) / (2 * math.sqrt(w))
    z, _ = integrate.quad(dens, 0, w_hi, points=[1.0])
    m, _ = integrate.quad(lambda w: (w - 2.0) * dens(w), 0, w_hi, points=[1.0])
    assert moments(one_sided, TruncationParams(1.0, cutoff), 1).mean == pytest.approx(m / z, rel=1e-8)


def test_tail_log_prob(symmetric, two_point):
    for y in (10.0, 1e4, 1e8):
        v = tail_log_prob(symmetric, y)
        assert v == pytest.approx(-math.sqrt(y) + math.log(0.5), rel=1e-14)
    assert tail_log_prob(symmetric, 1e12) / -1e6 == pytest.approx(1.0, abs=1e-6)
    trunc = TruncationParams(1.0, 5.0)
    assert tail_log_prob(symmetric, 5.0, trunc, 1) == -math.inf
    assert tail_log_prob(two_point, 1.0) == pytest.approx(math.log(0.5))
    # Truncated tail by hand.
    num = 0.5 * (math.exp(-math.sqrt(2.0)) - math.exp(-math.sqrt(5.0)))
    den = 1 - 0.5 * math.exp(-math.sqrt(5.0))
    assert tail_log_prob(symmetric, 2.0, trunc, 1) == pytest.approx(math.log(num / den), rel=1e-13)


def test_lattice_moments(two_point):
    m = moments(two_point)
    assert (m.mean, m.variance, m.abs_moment_2_gamma) == (0.0, 1.0, 1.0)


def test_truncated_variance_converges_monotonically(one_sided):
    vals = [moments(one_sided, TruncationParams(1.0, c), 1).variance for c in (10.0, 40.0, 160.0, 640.0, 5000.0)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] == pytest.approx(20.0, rel=1e-6)


def test_family_round_trip(symmetric, two_point):
    trunc = TruncationParams(0.9, 2.0, 3)
    fam, tr = family_from_dict(family_to_dict(symmetric, trunc))
    assert fam.to_dict() == symmetric.to_dict() and tr == trunc
    fam, tr = family_from_dict(family_to_dict(two_point))
    assert tr is None and np.array_equal(fam.lattice.masses, two_point.lattice.masses)


def test_audit_symmetric(symmetric):
    rep = audit_assumptions(symmetric, 0.8, [100, 1000, 10_000])
    assert rep.verdicts == {"H1": True, "H2": True, "H2+": True}
    for row in rep.rows:
        assert row.h1_ratio_min == pytest.approx(1.0, abs=1e-14)
        assert row.h1_ratio_max == pytest.approx(1.0, abs=1e-14)
        assert row.h1_raw_max > 1.0


def test_audit_censoring(symmetric):
    rep = audit_assumptions(symmetric, 0.8, [100, 1000], trunc=TruncationParams(0.5, 1.0))
    assert all(row.censored > 0 for row in rep.rows)
    assert rep.rows[0].h1_ratio_min > 0


def test_audit_needs_increasing_grid(symmetric):
    with pytest.raises(ParameterError):
        audit_assumptions(symmetric, 0.8, [100, 100])
