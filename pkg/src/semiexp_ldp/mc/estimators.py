"""Monte Carlo estimators of ``log P(T_N >= N**alpha * y)``.

All three estimators split their budget into batches whose random streams
come from :func:`semiexp_ldp._rng.batch_generator`; per-batch partial sums are
kept in log space and merged in batch order, so a result depends only on the
inputs and the seed, never on ``n_jobs``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from .._lattice import LatticeDist
from .._rng import batch_generator
from .._validation import (
    DegenerateTruncationError,
    DomainError,
    ParameterError,
    check_finite,
    check_positive,
    check_positive_int,
)
from ..model import MIN_ACCEPTANCE, acceptance_probability
from ..phase import classify
from ..rates import RateParams, theta_root, thresholds
from .lattice import cgf_and_tilt
from .results import EstimateResult

IS_BATCH = 1 << 14
DRAWS_PER_BATCH = 1 << 20
STRATUM_REL_WEIGHT = 1e-3
MAX_STRATA = 64
BIG_JUMP_REGIMES = ("max_jump", "transition1", "transition2", "trunc_max_jump", "t0")
TARGET_BACKOFF = 0.125


def _map_batches(fn, n_batches, n_jobs):
    n_jobs = check_positive_int("n_jobs", n_jobs)
    if n_jobs == 1 or n_batches == 1:
        return [fn(b) for b in range(n_batches)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, range(n_batches)))


def _split(total, size):
    full, rest = divmod(total, size)
    return [size] * full + ([rest] if rest else [])


def _log_sum(values):
    """``log(sum(exp(values)))`` with ``-inf`` for an empty or all-zero input."""
    if values.size == 0:
        return -math.inf
    return float(special.logsumexp(values))


def _log_diff(a, b):
    """``log(exp(a) - exp(b))`` for ``a >= b``; ``-inf`` when they coincide."""
    if b == -math.inf:
        return a
    if b >= a:
        return -math.inf
    return a + math.log(-math.expm1(b - a))


class _LogMoments:
    """Running ``log sum g`` and ``log sum g**2`` merged batch by batch."""

    def __init__(self):
        self.s1 = -math.inf
        self.s2 = -math.inf
        self.count = 0
        self.hits = 0

    def add(self, part):
        s1, s2, count, hits = part
        self.s1 = float(np.logaddexp(self.s1, s1))
        self.s2 = float(np.logaddexp(self.s2, s2))
        self.count += count
        self.hits += hits

    def log_mean(self):
        return self.s1 - math.log(self.count)

    def log_var_of_mean(self):
        """Log of the unbiased sample variance divided by the sample count."""
        n = self.count
        if n < 2:
            return math.inf
        if self.s1 == -math.inf:
            return -math.inf
        m1 = self.s1 - math.log(n)
        m2 = self.s2 - math.log(n)
        pop = _log_diff(m2, 2 * m1)
        return pop - math.log(n - 1)


def _part(logg, count=None):
    """Log-space partial sums of one batch; ``count`` includes zero terms not in ``logg``."""
    count = int(logg.size) if count is None else int(count)
    return (_log_sum(logg), _log_sum(2 * logg), count, int(np.count_nonzero(logg > -np.inf)))


def _std_err(log_p, log_var):
    if log_var == math.inf:
        return math.inf
    if log_p == -math.inf:
        return math.inf
    if log_var == -math.inf:
        return 0.0
    return math.exp(0.5 * log_var - log_p)


# Tilted importance sampling on a lattice.

def _tilt_target(dist, n, threshold):
    target = threshold / n
    if target <= dist.mean:
        return None
    ceiling = dist.max_point - TARGET_BACKOFF * (dist.max_point - dist.mean)
    return min(target, ceiling)


def tilted_is_estimate(dist, n, threshold, samples, seed, n_jobs=1):
    """Exponentially tilted importance sampling for ``P(X_1 + ... + X_n >= threshold)``.

    Sums are drawn under the tilted lattice law with mean ``threshold/n`` and
    weighted by ``exp(-lam * S + n * log E[exp(lam X)])``.  When the threshold
    sits at or above ``n`` times the largest support point the tilt target is
    backed off to keep the tilt finite; the estimator stays unbiased.  At or
    below ``n`` times the mean no tilt is applied.

    ``meta["weight_log_mean"]`` and ``meta["weight_std_err"]`` record the mean
    of all weights, which must be 1 up to noise.
    """
    if not isinstance(dist, LatticeDist):
        raise ParameterError("tilted_is_estimate works on a LatticeDist; use discretize first")
    n = check_positive_int("n", n)
    samples = check_positive_int("samples", samples)
    threshold = check_finite("threshold", threshold)
    k_t = math.ceil((threshold - n * dist.offset) / dist.h - 1e-9)
    top = n * (dist.size - 1)
    if k_t > top:
        return EstimateResult(n, threshold, -math.inf, 0.0, samples, "tilted_is", seed,
                              {"hits": 0, "impossible": True})
    target = _tilt_target(dist, n, threshold)
    lam, cgf = (0.0, 0.0) if target is None else cgf_and_tilt(dist, target)
    with np.errstate(divide="ignore"):
        logq = np.log(dist.masses) + lam * dist.support
    logq -= special.logsumexp(logq)
    cum = np.cumsum(np.exp(logq))
    cum /= cum[-1]
    sizes = _split(samples, IS_BATCH)

    def run(b):
        rng = batch_generator(seed, b)
        m = sizes[b]
        idx = np.searchsorted(cum, rng.random((m, n)), side="right")
        np.minimum(idx, dist.size - 1, out=idx)
        k = idx.sum(axis=1)
        s = n * dist.offset + dist.h * k
        logw = n * cgf - lam * s
        hit = k >= k_t
        return _part(logw[hit], m), _part(logw)

    est, lr = _LogMoments(), _LogMoments()
    for hit_part, all_part in _map_batches(run, len(sizes), n_jobs):
        est.add(hit_part)
        lr.add(all_part)
    log_p = min(est.log_mean(), 0.0) if est.hits else -math.inf
    se = _std_err(log_p, est.log_var_of_mean())
    meta = {
        "hits": est.hits,
        "lambda": lam,
        "cgf": cgf,
        "weight_log_mean": lr.log_mean(),
        "weight_std_err": math.exp(0.5 * lr.log_var_of_mean()) if samples > 1 else math.inf,
    }
    if dist.error_bound is not None:
        meta["discretization_error_bound"] = dist.error_bound
    return EstimateResult(n, threshold, log_p, se, samples, "tilted_is", seed, meta)


# Naive estimator on the continuous families.

def _cutoff(trunc, N):
    return math.inf if trunc is None else trunc.cutoff(N)


def _check_capped(family, cutoff):
    if acceptance_probability(family, cutoff) < MIN_ACCEPTANCE:
        raise DegenerateTruncationError(f"P(Y < {cutoff:g}) is below {MIN_ACCEPTANCE:g}")


def _draw_below(family, rng, size, bound):
    """Draws of ``Y`` conditioned on ``Y < bound``; rejected values are redrawn."""
    x = family.draw(rng, size)
    if math.isinf(bound):
        return x
    bad = np.flatnonzero(x >= bound)
    while bad.size:
        x[bad] = family.draw(rng, bad.size)
        bad = bad[x[bad] >= bound]
    return x


def naive_estimate(family, trunc, N, alpha, y, samples, seed, n_jobs=1):
    """Crude Monte Carlo frequency of ``T_N >= N**alpha * y``.

    ``trunc=None`` samples the uncapped family.  The standard error is the
    binomial one carried to log scale, ``sqrt((1 - p) / hits)``.
    """
    N = check_positive_int("N", N)
    samples = check_positive_int("samples", samples)
    alpha = check_positive("alpha", alpha)
    y = check_finite("y", y)
    cutoff = _cutoff(trunc, N)
    _check_capped(family, cutoff)
    x = N**alpha * y
    per = max(1, DRAWS_PER_BATCH // N)
    sizes = _split(samples, per)

    def run(b):
        rng = batch_generator(seed, b)
        t = _draw_below(family, rng, sizes[b] * N, cutoff).reshape(sizes[b], N).sum(axis=1)
        return int(np.count_nonzero(t >= x))

    hits = sum(_map_batches(run, len(sizes), n_jobs))
    if hits == 0:
        log_p, se = -math.inf, math.inf
    else:
        p = hits / samples
        log_p = math.log(p)
        se = math.sqrt((1 - p) / hits)
    return EstimateResult(N, y, log_p, se, samples, "naive", seed,
                          {"hits": hits, "threshold": x, "alpha": alpha})


# Big-jump splitting.

def _log1mexp(d):
    """``log(1 - exp(d))`` for ``d <= 0``, elementwise."""
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(d > -math.log(2), np.log(-np.expm1(d)), np.log1p(-np.exp(d)))


class _Interval:
    """The law of ``Y`` restricted to ``[lo, hi)``."""

    def __init__(self, family, lo, hi):
        self.family, self.lo, self.hi = family, lo, hi
        self.ls_lo = float(family.logsf(lo)) if math.isfinite(lo) else 0.0
        self.ls_hi = float(family.logsf(hi)) if math.isfinite(hi) else -math.inf
        self.log_mass = _log_diff(self.ls_lo, self.ls_hi)

    def log_tail(self, t):
        """``log P(Y >= t | lo <= Y < hi)``, elementwise."""
        a = np.maximum(np.asarray(t, dtype=np.float64), self.lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            ls = np.where(a > self.lo, self.family.logsf(a), self.ls_lo)
            out = ls + _log1mexp(np.minimum(self.ls_hi - ls, 0.0)) - self.log_mass
        return np.where(a >= self.hi, -np.inf, np.minimum(out, 0.0))

    def draw(self, rng, size):
        fam = self.family
        if size == 0:
            return np.empty(0)
        if not math.isfinite(self.lo):
            return _draw_below(fam, rng, size, self.hi)
        if fam.kind == "lattice" or (fam.kind == "symmetric" and self.lo < 0):
            return self._reject(rng, size)
        # Upper interval of a continuous family: invert the log tail.
        u = rng.random(size)
        ls = self.ls_lo + np.log1p(-u * -math.expm1(self.ls_hi - self.ls_lo))
        a = fam.tail_log_constant - ls
        t = (np.maximum(a, 0.0) / fam.params.q) ** (1.0 / fam.k) - fam.shift
        return np.clip(t, self.lo, np.nextafter(self.hi, -math.inf))

    def _reject(self, rng, size):
        out = np.empty(size)
        pos = 0
        while pos < size:
            x = self.family.draw(rng, max(2 * (size - pos), 64))
            x = x[(x >= self.lo) & (x < self.hi)]
            take = min(size - pos, x.size)
            out[pos:pos + take] = x[:take]
            pos += take
        return out


def jump_theta(family, trunc, alpha, y):
    """Jump share ``theta_hat`` and the regime it was chosen for."""
    beta = math.inf if trunc is None else trunc.beta
    c = 1.0 if trunc is None else trunc.c
    info = classify(alpha, beta, family.params, c, y)
    if info.regime not in BIG_JUMP_REGIMES:
        raise DomainError(f"big-jump splitting needs a jump regime, got {info.regime}")
    theta = 1.0
    if info.regime in ("transition1", "t0"):
        params = RateParams(family.params, c)
        if y > thresholds(params).y0:
            theta = theta_root(params, y)
    return theta, info.regime


def _binomial_log_weights(N, log_p):
    m = np.arange(N + 1)
    if log_p == -math.inf:
        w = np.full(N + 1, -np.inf)
        w[0] = 0.0
        return w
    log_q = float(_log1mexp(log_p))
    return special.gammaln(N + 1) - special.gammaln(m + 1) - special.gammaln(N - m + 1) + m * log_p + (N - m) * log_q


def big_jump_split_estimate(family, trunc, N, alpha, y, samples, seed, n_jobs=1, theta=None):
    """Stratified estimator built around the largest summands.

    Summands at or above ``u* = min(theta_hat * x, cutoff / 2)`` (with
    ``x = N**alpha * y``) are "big".  Stratum ``m`` holds exactly ``m`` big
    summands and enters with its binomial weight.  Inside a stratum the
    summands of one group (the big ones if ``m >= 1``, otherwise all of them)
    are exchangeable, and for continuous laws::

        P(T >= x | stratum) = m' * E[ Fbar_G(max(M, x - S)) ]

    where ``m'`` is the group size, ``M`` the largest of the other group
    members, ``S`` the sum of the other ``N - 1`` summands and ``Fbar_G`` the
    tail of the group's conditional law.  Lattice families use the plain
    conditional form ``E[Fbar_G(x - S)]``.  Strata are added while the binomial
    mass above the last one exceeds ``1e-3`` of the running estimate; that
    mass is reported as ``meta["bias_bound"]``.  ``samples`` replicates are
    drawn per stratum.

    An explicit ``theta`` sets ``u* = theta * x`` without the ``cutoff / 2``
    cap; with ``u*`` at or above the cutoff only the no-jump stratum remains.
    """
    N = check_positive_int("N", N)
    samples = check_positive_int("samples", samples)
    alpha = check_positive("alpha", alpha)
    y = check_positive("y", y)
    cutoff = _cutoff(trunc, N)
    _check_capped(family, cutoff)
    x = N**alpha * y
    if theta is None:
        theta, regime = jump_theta(family, trunc, alpha, y)
        u_star = min(theta * x, 0.5 * cutoff)
    else:
        theta, regime = check_positive("theta", theta), "override"
        u_star = theta * x
    small = _Interval(family, -math.inf, min(u_star, cutoff))
    big = _Interval(family, u_star, cutoff)
    capped = _Interval(family, -math.inf, cutoff)
    log_pu = big.log_mass - capped.log_mass if u_star < cutoff else -math.inf
    log_w = _binomial_log_weights(N, log_pu)
    log_tail = np.logaddexp.accumulate(log_w[::-1])[::-1]
    log_tail = np.append(log_tail[1:], -np.inf)
    smoothing = "plain" if family.kind == "lattice" else "max"

    def stratum(m):
        group, size = (small, N) if m == 0 else (big, m)
        n_small = N - m if m else N - 1
        n_group = size - 1
        log_factor = math.log(size) if smoothing == "max" else 0.0
        per = max(1, DRAWS_PER_BATCH // N)
        sizes = _split(samples, per)

        def run(b):
            rng = batch_generator(seed, (m << 32) | b)
            r = sizes[b]
            s = _draw_below(family, rng, r * n_small, small.hi).reshape(r, n_small).sum(axis=1) if m else None
            others = group.draw(rng, r * n_group).reshape(r, n_group)
            if m:
                s = s + others.sum(axis=1)
            else:
                s = others.sum(axis=1)
            t = x - s
            if smoothing == "max" and n_group:
                t = np.maximum(t, others.max(axis=1))
            return _part(group.log_tail(t) + log_factor)

        acc = _LogMoments()
        for part in _map_batches(run, len(sizes), n_jobs):
            acc.add(part)
        return acc

    log_p = -math.inf
    log_var = -math.inf
    strata = []
    empty = []
    m = 0
    while True:
        if log_w[m] > -math.inf:
            acc = stratum(m)
            lm = acc.log_mean() if acc.hits else -math.inf
            lv = acc.log_var_of_mean()
            if not acc.hits:
                empty.append(m)
                lv = math.log(3.0 / samples) * 2 if samples > 1 else math.inf
            log_p = float(np.logaddexp(log_p, log_w[m] + lm))
            log_var = float(np.logaddexp(log_var, 2 * log_w[m] + lv))
            strata.append({"m": m, "log_weight": float(log_w[m]), "log_cond": lm, "hits": acc.hits})
        done = log_tail[m] == -math.inf or (log_p > -math.inf and log_tail[m] < math.log(STRATUM_REL_WEIGHT) + log_p)
        if done or m + 1 >= MAX_STRATA or m >= N:
            break
        m += 1
    log_p = min(log_p, 0.0)
    se = _std_err(log_p, log_var)
    meta = {
        "theta": theta,
        "regime": regime,
        "u_star": u_star,
        "threshold": x,
        "alpha": alpha,
        "strata": strata,
        "bias_bound": math.exp(log_tail[m]),
        "log_bias_bound": float(log_tail[m]),
        "empty_strata": empty,
    }
    return EstimateResult(N, y, log_p, se, samples, "big_jump_split", seed, meta)


def exact_result(dist, n, threshold):
    """:func:`exact_tail_convolution` packaged as an ``EstimateResult``."""
    from .lattice import exact_tail_convolution

    return EstimateResult(n, float(threshold), exact_tail_convolution(dist, n, threshold), 0.0, 1,
                          "exact_lattice", 0, {})
