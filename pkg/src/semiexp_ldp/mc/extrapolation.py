"""Limits of ``log p_n / n**s`` by fitting ``r_n = r_inf + a n**(-b)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .._validation import ParameterError

B_BRACKET = (1e-6, 20.0)
NOISE_SIGMAS = 3.0


@dataclass(frozen=True)
class SlopeFit:
    """Extrapolated limit and the per-n ratio table.

    ``table`` rows are ``(n, log_prob, std_err, ratio, ratio_std_err)``.
    ``reliable`` is False when the ratios fail to move monotonically beyond
    noise or the three-point fit has no solution with ``b > 0``.
    """

    limit: float
    a: float
    b: float
    table: list = field(default_factory=list)
    reliable: bool = True
    reason: str = ""

    def ratios(self):
        return [row[3] for row in self.table]


def _exact_three_point(n, r):
    """Solve ``r_i = r_inf + a n_i**(-b)`` through three points, or None."""
    target = (r[2] - r[1]) / (r[1] - r[0])

    def g(b):
        x = n ** (-b)
        return (x[2] - x[1]) / (x[1] - x[0]) - target

    lo, hi = B_BRACKET
    glo, ghi = g(lo), g(hi)
    if not (np.isfinite(glo) and np.isfinite(ghi)) or glo * ghi > 0:
        return None
    b = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-14)
    x = n ** (-b)
    a = (r[1] - r[0]) / (x[1] - x[0])
    return r[0] - a * x[0], a, b


def _least_squares(n, r):
    def resid(p):
        return p[0] + p[1] * n ** (-p[2]) - r

    x0 = (r[-1], (r[0] - r[-1]) * n[0], 1.0)
    sol = optimize.least_squares(resid, x0, bounds=([-np.inf, -np.inf, B_BRACKET[0]], [np.inf, np.inf, B_BRACKET[1]]))
    return tuple(float(v) for v in sol.x)


def slope_fit(results, speed_exponent):
    """Extrapolate ``log_prob / n**speed_exponent`` to ``n -> infinity``.

    Uses the three largest ``n``.  Constant ratios return that constant.
    """
    results = list(results)
    ns = sorted({r.n for r in results})
    if len(ns) < 3 or len(ns) != len(results):
        raise ParameterError("slope_fit needs at least three results with distinct n")
    if len({r.y for r in results}) != 1:
        raise ParameterError("slope_fit needs results at a single y")
    results.sort(key=lambda r: r.n)
    s = float(speed_exponent)
    table = []
    for res in results:
        scale = res.n**s
        table.append((res.n, res.log_prob, res.std_err, res.log_prob / scale, res.std_err / scale))
    use = table[-3:]
    n = np.array([row[0] for row in use], dtype=np.float64)
    r = np.array([row[3] for row in use])
    err = np.array([row[4] for row in use])
    if not np.all(np.isfinite(r)):
        return SlopeFit(math.nan, math.nan, math.nan, table, False, "non-finite ratio")
    d = np.diff(r)
    noise = NOISE_SIGMAS * np.sqrt(err[1:] ** 2 + err[:-1] ** 2)
    scale = max(1.0, float(np.max(np.abs(r))))
    if np.all(np.abs(d) <= 1e-12 * scale):
        return SlopeFit(float(r[-1]), 0.0, math.nan, table, True, "constant ratios")
    reliable, reason = True, ""
    if d[0] * d[1] < 0 and np.all(np.abs(d) > noise):
        reliable, reason = False, "ratios not monotone beyond noise"
    fit = None
    if d[0] != 0 and d[0] * d[1] > 0 and abs(d[1]) < abs(d[0]):
        fit = _exact_three_point(n, r)
    if fit is None:
        fit = _least_squares(n, r)
        if reliable:
            reliable, reason = False, "no exact three-point fit with b > 0"
    limit, a, b = fit
    return SlopeFit(float(limit), float(a), float(b), table, reliable, reason)
