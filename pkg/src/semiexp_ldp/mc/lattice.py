"""Exact lattice oracle, exponential tilting and discretisation."""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize, signal, special

from .._lattice import LatticeDist
from .._validation import DomainError, ParameterError, ResourceError, check_positive, check_positive_int

MAX_SUPPORT = 10**7
DIRECT_LIMIT = 4 * 10**6
TRIM = 1e-40
MIN_POINTS = 16
LOWER_QUANTILE = 1e-12


def _convolve(a, b):
    if a.size * b.size <= DIRECT_LIMIT:
        out = np.convolve(a, b)
    else:
        out = signal.fftconvolve(a, b)
    np.maximum(out, 0.0, out=out)
    return out


def _trim(p, start):
    keep = np.flatnonzero(p > TRIM * p.max())
    lo, hi = keep[0], keep[-1] + 1
    return p[lo:hi], start + lo


def _oracle_tilt(dist, target):
    """A tilt putting the bulk of the n-fold sum near ``n * target``.

    Any finite tilt gives an exact identity; this one only controls where
    floating-point resolution is spent.
    """
    if target <= dist.mean:
        return 0.0
    x = dist.support - dist.max_point
    logp = np.log(dist.masses, where=dist.masses > 0, out=np.full(dist.size, -np.inf))

    def gap(lam):
        w = logp + lam * x
        w = np.exp(w - w.max())
        return np.dot(w, dist.support) / w.sum() - target

    hi = 1.0 / dist.h
    while gap(hi) < 0:
        hi *= 2
        if hi > 1e6 / dist.h:
            return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


def exact_tail_convolution(dist, n, threshold):
    """Exact ``log P(X_1 + ... + X_n >= threshold)`` for i.i.d. lattice X.

    The n-fold law is built by repeated squaring.  Masses are first tilted
    by ``exp(lam * x)`` so that the sum's bulk sits at the threshold, the
    convolution is carried out on the tilted masses, and the tilt is undone
    in log space::

        P(S = s) = exp(n * Lambda(lam) - lam * s) * P_lam(S = s)

    which keeps the relative error near the threshold at the level of
    floating-point summation even for probabilities far below ``1e-300``.
    """
    n = check_positive_int("n", n)
    threshold = float(threshold)
    span = n * (dist.size - 1) + 1
    if span > MAX_SUPPORT:
        raise ResourceError(f"sum support of {span} points exceeds the {MAX_SUPPORT} guard")
    s_t = math.ceil((threshold - n * dist.offset) / dist.h - 1e-9)
    if s_t <= 0:
        return 0.0
    top = n * (dist.size - 1)
    if s_t > top:
        return -math.inf
    if s_t == top:
        pk = dist.masses[-1]
        return n * math.log(pk) if pk > 0 else -math.inf

    lam = _oracle_tilt(dist, threshold / n)
    k = np.arange(dist.size)
    with np.errstate(divide="ignore"):
        logp = np.log(dist.masses) + lam * dist.h * k
    log_z = special.logsumexp(logp)
    base = np.exp(logp - log_z)
    base, base_start = _trim(base, 0)

    acc, acc_start = None, 0
    power, power_start = base, base_start
    m = n
    while m:
        if m & 1:
            if acc is None:
                acc, acc_start = power.copy(), power_start
            else:
                acc, acc_start = _trim(_convolve(acc, power), acc_start + power_start)
        m >>= 1
        if m:
            power, power_start = _trim(_convolve(power, power), 2 * power_start)
    acc = acc / acc.sum()
    s = acc_start + np.arange(acc.size)
    sel = s >= s_t
    if not sel.any():
        return -math.inf
    with np.errstate(divide="ignore"):
        terms = np.log(acc[sel]) - lam * dist.h * s[sel]
    return float(n * log_z + special.logsumexp(terms))


def log_mgf(dist, lam):
    """``log E[exp(lam X)]``."""
    with np.errstate(divide="ignore"):
        return float(special.logsumexp(np.log(dist.masses) + lam * dist.support))


def tilted_masses(dist, lam):
    with np.errstate(divide="ignore"):
        w = np.log(dist.masses) + lam * dist.support
    w = np.exp(w - special.logsumexp(w))
    return w / w.sum()


def _tilted_mean(dist, lam):
    return float(np.dot(tilted_masses(dist, lam), dist.support))


def cgf_and_tilt(dist, target_mean):
    """Tilt ``lam >= 0`` with tilted mean ``target_mean`` and ``log E[exp(lam X)]``.

    Brent's method on a bracket obtained by doubling from ``1/h``.
    """
    target = float(target_mean)
    width = dist.max_point - dist.min_point
    tol = 1e-10 * max(width, dist.h)
    if abs(target - dist.mean) <= tol:
        return 0.0, 0.0 if abs(dist.mean) <= tol else log_mgf(dist, 0.0)
    if target < dist.mean:
        raise DomainError(f"target mean {target!r} is below the lattice mean {dist.mean!r}")
    if target >= dist.max_point:
        raise DomainError(f"target mean {target!r} is not below the largest support point {dist.max_point!r}")
    hi = 1.0 / dist.h
    while _tilted_mean(dist, hi) < target:
        hi *= 2.0
        if hi > 1e8 / dist.h:
            raise DomainError(f"target mean {target!r} is numerically unattainable")
    lam = optimize.brentq(lambda t: _tilted_mean(dist, t) - target, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(_tilted_mean(dist, lam) - target) >= max(tol, 1e-13 * abs(target)):
        raise DomainError(f"tilt root-finding missed the target mean {target!r}")
    return float(lam), log_mgf(dist, lam)


def discretize(family, trunc, N, h):
    """Lattice version of the capped law ``L(Y | Y < N**beta c)``.

    Cell ``[k h, (k+1) h)`` receives its exact probability under the capped
    law; the lower tail below the ``1e-12`` quantile is folded into the
    first cell, and the grid is shifted so the mean is exactly zero.  The
    returned ``error_bound`` bounds the Kolmogorov distance between the
    lattice law (before the shift) and the capped law: the largest cell mass
    plus the folded mass.
    """
    h = check_positive("h", h)
    if trunc is None:
        raise ParameterError("discretize needs a truncation (finite upper support)")
    if family.kind == "lattice":
        raise ParameterError("family is already a lattice")
    cutoff = trunc.cutoff(N)
    p = family.params
    if family.kind == "symmetric":
        lower = -((math.log(0.5 / LOWER_QUANTILE) / p.q) ** (1.0 / family.k))
    else:
        lower = family.lower_bound
    if cutoff <= lower:
        raise ParameterError(f"cutoff {cutoff!r} lies below the clipped support")
    k_lo = math.floor(lower / h)
    k_hi = math.ceil(cutoff / h) - 1
    if k_hi - k_lo + 1 < MIN_POINTS:
        raise ParameterError(f"step h={h!r} leaves fewer than {MIN_POINTS} support points")
    if k_hi - k_lo + 1 > MAX_SUPPORT:
        raise ResourceError(f"step h={h!r} needs {k_hi - k_lo + 1} support points, above the {MAX_SUPPORT} guard")
    edges = h * np.arange(k_lo, k_hi + 2, dtype=np.float64)
    edges[-1] = cutoff
    sf = family.sf(edges)
    cdf = family.cdf(edges)
    upper_half = edges[:-1] >= 0
    mass = np.where(upper_half, sf[:-1] - sf[1:], cdf[1:] - cdf[:-1])
    folded = float(cdf[0])
    mass[0] += folded
    mass = np.maximum(mass, 0.0)
    mass /= mass.sum()
    raw_points = edges[:-1]
    raw_points[-1] = h * k_hi
    mean = float(np.dot(mass, h * np.arange(k_lo, k_hi + 1)))
    bound = float(mass.max() + folded)
    return LatticeDist(h, h * k_lo - mean, mass, error_bound=bound)
