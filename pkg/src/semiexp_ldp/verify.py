"""Self-check suites behind ``semiexp-ldp verify``.

Each check returns ``{"name", "passed", "worst", "tolerance", ...}``; a suite
report passes iff all of its checks do.
"""

from __future__ import annotations

import math

import numpy as np

from . import rates
from .model import SemiexpFamily, TruncationParams, audit_assumptions

RATE_TOL = 1e-8
ROOT_TOL = 1e-10
SUITES = ("rates", "mc", "audit")


def random_rate_params(rng, count):
    """Parameter sets with eps in [0.1, 0.9], q in [0.5, 3], sigma2 in [0.5, 4], c in [0.3, 3]."""
    out = []
    for _ in range(count):
        out.append(rates.RateParams.of(
            rng.uniform(0.1, 0.9), rng.uniform(0.5, 3.0), rng.uniform(0.5, 4.0), rng.uniform(0.3, 3.0),
        ))
    return out


def _check(name, worst, tol, **extra):
    return {"name": name, "passed": bool(worst < tol), "worst": float(worst), "tolerance": tol, **extra}


def rates_suite(seed=0, n_sets=20, n_y=200, resolution=None):
    rng = np.random.default_rng(seed)
    sets = random_rate_params(rng, n_sets)
    checks = []
    for rid in rates.RATE_IDS:
        res = resolution or (64 if rid in ("transition2", "t0") else 1000)
        worst = 0.0
        for p in sets:
            ys = np.sort(rng.uniform(0, 10 * rates.thresholds(p).y1, n_y))
            closed = rates.rate_values(rid, p, ys)
            oracle = rates.rate_oracle_grid(rid, p, ys, res)
            worst = max(worst, float(np.max(np.abs(closed - oracle))))
        checks.append(_check(f"oracle:{rid}", worst, RATE_TOL))
    worst = 0.0
    for p in sets:
        th = rates.thresholds(p)
        for y in th.y0 * (1 + np.geomspace(1e-6, 50, n_y)):
            theta = rates.theta_root(p, y)
            worst = max(worst, abs(rates.first_order_residual(p, y, theta)))
    checks.append(_check("theta_residual", worst, ROOT_TOL))
    checks.append(_check("continuity", continuity_worst(sets), RATE_TOL))
    checks.append(_check("t0_branches_at_c0", c0_agreement_worst(sets), RATE_TOL))
    return checks


def _jump(fn, y, h=1e-7):
    """Gap between the one-sided limits at ``y``, each extrapolated linearly."""
    d = h * max(1.0, abs(y))
    left = 2 * fn(y - d) - fn(y - 2 * d)
    right = 2 * fn(y + d) - fn(y + 2 * d)
    return abs(right - left)


def continuity_worst(sets, n_kinks=5):
    """Largest value jump across the branch points of the piecewise rates.

    The saturated-jump forms are checked at their own kinks: the Gaussian
    one with the drawn ``c``, the transition one with ``c`` raised to at
    least ``c0`` where it is used.
    """
    worst = 0.0
    for p in sets:
        th = rates.thresholds(p)
        worst = max(worst, _jump(lambda y: rates.transition_rate(p, y).value, th.y1))
        worst = max(worst, _jump(lambda y: rates.transition3_rate(p, y).value, th.y3))
        p2 = rates.RateParams(p.model, max(p.c, th.c0))
        th2 = rates.thresholds(p2)
        for k in range(n_kinks):
            worst = max(worst, _jump(lambda y: rates._t0_first(p, y, th).value, th.y01 + k * p.c))
            worst = max(worst, _jump(lambda y: rates._t0_second(p2, y, th2).value, th2.y02 + k * p2.c))
    return worst


def c0_agreement_worst(sets, n_y=200):
    """``max |I01 - I02|`` at ``c = c0`` on a grid of ``y``."""
    worst = 0.0
    for p in sets:
        c0 = rates.thresholds(p).c0
        p0 = rates.RateParams(p.model, c0)
        th = rates.thresholds(p0)
        for y in np.linspace(0, 6 * c0 + th.y02, n_y):
            worst = max(worst, abs(rates._t0_first(p0, y, th).value - rates._t0_second(p0, y, th).value))
    return worst


def mc_suite(seed=0, n=32, samples=20_000):
    from . import mc

    checks = []
    two = mc.LatticeDist.two_point()
    t = 2 * math.ceil(n / 4)
    exact = mc.exact_tail_convolution(two, n, t)
    est = mc.tilted_is_estimate(two, n, t, samples, seed)
    checks.append(_check("two_point_is_vs_exact", abs(est.log_prob - exact) / est.std_err, 3.0,
                         exact=exact, estimate=est.log_prob, std_err=est.std_err))
    fam = SemiexpFamily.weibull("symmetric", 0.5, 1.0)
    dist = mc.discretize(fam, TruncationParams(1.0, 8.0), 1, 1 / 16)
    t = 0.75 * n * dist.max_point
    exact = mc.exact_tail_convolution(dist, n, t)
    est = mc.tilted_is_estimate(dist, n, t, samples, seed)
    checks.append(_check("truncated_is_vs_exact", abs(est.log_prob - exact) / est.std_err, 3.0,
                         exact=exact, estimate=est.log_prob, std_err=est.std_err))
    # The weight-mean identity is only informative under a mild tilt.
    lr = mc.tilted_is_estimate(two, 4, 2, samples, seed).meta
    checks.append(_check("likelihood_ratio_identity", abs(math.expm1(lr["weight_log_mean"])) / lr["weight_std_err"], 3.0))
    return checks


def audit_suite(family="symmetric", alpha=0.8, n_grid=(100, 1000, 10_000), band=(0.98, 1.02)):
    fam = SemiexpFamily.weibull(family, 0.5, 1.0)
    report = audit_assumptions(fam, alpha, list(n_grid), h1_band=band)
    last = report.rows[-1]
    worst = max(abs(last.h1_ratio_min - 1), abs(last.h1_ratio_max - 1))
    return [_check("H1", worst, band[1] - 1 + 1e-15, raw_min=last.h1_raw_min, raw_max=last.h1_raw_max)]


def run_suite(suite, seed=0, n=32, family="symmetric", env=None):
    names = SUITES if suite == "all" else (suite,)
    checks = []
    for name in names:
        if name == "rates":
            checks += rates_suite(seed)
        elif name == "mc":
            checks += mc_suite(seed, n)
        elif name == "audit":
            checks += audit_suite(family)
        else:
            raise ValueError(f"unknown suite {name!r}")
    return {"suite": suite, "passed": all(c["passed"] for c in checks), "checks": checks}
