import math

import numpy as np
import pytest
from scipy import integrate, special

from semiexp_ldp._validation import DomainError, ParameterError, ResourceError
from semiexp_ldp.mc import LatticeDist, cgf_and_tilt, discretize, exact_tail_convolution, log_mgf
from semiexp_ldp.model import SemiexpFamily, TruncationParams

TWO = LatticeDist.two_point()


def binomial_log_tail(n, k_min):
    """log P(Bin(n, 1/2) >= k_min) by summing log-gamma terms."""
    k = np.arange(max(k_min, 0), n + 1)
    terms = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1) - n * math.log(2)
    return float(special.logsumexp(terms))


def test_two_point_examples():
    assert exact_tail_convolution(TWO, 4, 4) == pytest.approx(math.log(1 / 16), rel=1e-14)
    assert exact_tail_convolution(TWO, 4, 2) == pytest.approx(math.log(5 / 16), rel=1e-14)
    assert exact_tail_convolution(TWO, 4, -4) == 0.0
    assert exact_tail_convolution(TWO, 4, -100) == 0.0
    assert exact_tail_convolution(TWO, 4, 4.5) == -math.inf


@pytest.mark.parametrize("n", [1, 7, 64, 1000, 4096])
def test_binomial_oracle(n):
    for frac in (0.0, 0.3, 0.8, 0.99):
        t = frac * n
        k_min = math.ceil((t + n) / 2 - 1e-9)
        want = binomial_log_tail(n, k_min)
        assert exact_tail_convolution(TWO, n, t) == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_general_lattice_against_direct_convolution():
    masses = np.array([0.1, 0.0, 0.35, 0.25, 0.3])
    dist = LatticeDist(0.5, -1.0, masses)
    n = 9
    direct = np.array([1.0])
    for _ in range(n):
        direct = np.convolve(direct, masses)
    sums = n * dist.offset + dist.h * np.arange(direct.size)
    for t in (-3.0, 0.0, 2.25, 5.0, 8.0, 9.0):
        want = math.log(direct[sums >= t - 1e-12].sum())
        assert exact_tail_convolution(dist, n, t) == pytest.approx(want, rel=1e-11)


def test_monotone_in_threshold():
    dist = LatticeDist(1.0, -2.0, np.array([0.2, 0.3, 0.1, 0.15, 0.25]))
    vals = [exact_tail_convolution(dist, 50, t) for t in np.linspace(-100, 100, 81)]
    assert np.all(np.diff(vals) <= 0)


def test_support_guard():
    wide = LatticeDist(1.0, 0.0, np.full(2000, 1 / 2000))
    with pytest.raises(ResourceError):
        exact_tail_convolution(wide, 10**4, 5e6)


def test_cgf_and_tilt_examples():
    lam, cgf = cgf_and_tilt(TWO, 0.5)
    assert lam == pytest.approx(math.atanh(0.5), rel=1e-12)
    assert cgf == pytest.approx(math.log(math.cosh(lam)), rel=1e-12)
    assert cgf == pytest.approx(log_mgf(TWO, lam), rel=1e-14)
    assert cgf_and_tilt(TWO, 0.0) == (0.0, 0.0)
    lam, _ = cgf_and_tilt(TWO, 1 - 1e-9)
    assert lam == pytest.approx(math.atanh(1 - 1e-9), rel=1e-6)
    for bad in (1.0, 2.0, -0.1):
        with pytest.raises(DomainError):
            cgf_and_tilt(TWO, bad)


@pytest.fixture(scope="module")
def sym():
    return SemiexpFamily.weibull("symmetric", 0.5, 1.0)


def capped_variance(q, k, cutoff):
    """Variance of the symmetric law given Y < cutoff, by quadrature on the magnitude."""
    dens = lambda t: 0.5 * q * k * t ** (k - 1) * math.exp(-q * t**k)
    opts = dict(limit=400, epsabs=0, epsrel=1e-12)
    m0_neg, _ = integrate.quad(dens, 0, np.inf, **opts)
    m1_neg, _ = integrate.quad(lambda t: t * dens(t), 0, np.inf, **opts)
    m2_neg, _ = integrate.quad(lambda t: t * t * dens(t), 0, np.inf, **opts)
    m0_pos, _ = integrate.quad(dens, 0, cutoff, **opts)
    m1_pos, _ = integrate.quad(lambda t: t * dens(t), 0, cutoff, **opts)
    m2_pos, _ = integrate.quad(lambda t: t * t * dens(t), 0, cutoff, **opts)
    z = m0_neg + m0_pos
    mean = (m1_pos - m1_neg) / z
    return (m2_pos + m2_neg) / z - mean * mean


def test_discretized_variance_converges(sym):
    trunc = TruncationParams(0.9, 1.0)
    want = capped_variance(1.0, 0.5, trunc.cutoff(100))
    errs = [abs(discretize(sym, trunc, 100, h).variance - want) for h in (0.1, 0.05, 0.025)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] / want < 1e-2


def test_discretize_mass_and_symmetry(sym):
    # A cutoff far in the tail keeps the grid symmetric near the origin.
    d = discretize(sym, TruncationParams(1.0, 1e3), 1, 0.25)
    assert abs(d.masses.sum() - 1) < 1e-12
    assert abs(d.mean) < 1e-9
    m = d.masses
    # Cell [kh,(k+1)h) mirrors [-(k+1)h,-kh).
    zero = int(np.argmin(np.abs(d.support)))
    left, right = m[zero - 200:zero][::-1], m[zero:zero + 200]
    assert np.max(np.abs(left - right)) < 1e-12


def test_discretize_errors(sym):
    with pytest.raises(ParameterError):
        discretize(sym, None, 100, 0.1)
    with pytest.raises(ParameterError):
        discretize(sym, TruncationParams(0.5, 1.0), 4, 100.0)
    with pytest.raises(ResourceError):
        discretize(sym, TruncationParams(1.0, 1e9), 1, 0.25)
    with pytest.raises(ParameterError):
        discretize(SemiexpFamily.from_lattice(TWO), TruncationParams(0.5, 1.0), 4, 0.1)


def test_discretize_error_bound_reported(sym):
    d = discretize(sym, TruncationParams(0.9, 1.0), 100, 0.05)
    assert 0 < d.error_bound < 1
    assert d.error_bound >= d.masses.max()
