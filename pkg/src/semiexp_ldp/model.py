"""Semiexponential base laws, their truncations, moments and audits.

Two continuous families are provided, both built from a Weibull magnitude
``W`` with survival function ``P(W >= t) = exp(-q t**(1 - eps))``:

``one_sided_centered``
    ``Y = W - E[W]``.
``symmetric``
    ``Y = S * W`` with an independent fair sign ``S``.

A third kind, ``lattice``, wraps a finite grid distribution and is used for
exact small-n checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from ._lattice import MASS_TOL, LatticeDist
from ._rng import BATCH_SIZE, batch_generator
from ._validation import (
    DegenerateTruncationError,
    NumericError,
    ParameterError,
    check_open_unit,
    check_positive,
    check_positive_int,
)

KINDS = ("one_sided_centered", "symmetric", "lattice")
QUAD_ABS_TOL = 1e-10
MIN_ACCEPTANCE = 1e-6


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    q: float
    sigma2: float
    gamma: float = 1.0

    def __post_init__(self):
        check_open_unit("epsilon", self.epsilon)
        check_positive("q", self.q)
        check_positive("sigma2", self.sigma2)
        if not 0.0 < float(self.gamma) <= 1.0:
            raise ParameterError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        for name in ("epsilon", "q", "sigma2", "gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))


@dataclass(frozen=True)
class TruncationParams:
    """Row-dependent cap: ``Y_n ~ L(Y | Y < N_n**beta * c)``."""

    beta: float
    c: float
    n_index: int = 1

    def __post_init__(self):
        check_positive("beta", self.beta)
        check_positive("c", self.c)
        check_positive_int("n_index", self.n_index)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "n_index", int(self.n_index))

    def cutoff(self, N=None):
        """The cap ``N**beta * c``; ``N`` defaults to ``n_index``."""
        N = self.n_index if N is None else check_positive_int("N", N)
        return float(N) ** self.beta * self.c


@dataclass(frozen=True)
class MomentReport:
    mean: float
    variance: float
    abs_moment_2_gamma: float
    cutoff: float = math.inf

    def __post_init__(self):
        for name in ("mean", "variance", "abs_moment_2_gamma", "cutoff"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def second_moment(self):
        return self.variance + self.mean * self.mean


def weibull_mean(epsilon, q):
    k = 1.0 - epsilon
    return special.gamma(1.0 + 1.0 / k) * q ** (-1.0 / k)


def weibull_raw_moment(epsilon, q, order):
    """``E[W**order]`` for the Weibull magnitude."""
    k = 1.0 - epsilon
    return special.gamma(1.0 + order / k) * q ** (-order / k)


def weibull_magnitude(u, q, epsilon):
    """Inverse-transform map ``u -> ((-ln u) / q) ** (1 / (1 - eps))``."""
    return (-np.log(u) / q) ** (1.0 / (1.0 - epsilon))


@dataclass(frozen=True, eq=False)
class SemiexpFamily:
    kind: str
    params: ModelParams
    lattice: LatticeDist | None = None
    shift: float = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown family kind {self.kind!r}; expected one of {KINDS}")
        if (self.kind == "lattice") != (self.lattice is not None):
            raise ParameterError("a lattice distribution must be given iff kind == 'lattice'")
        p = self.params
        if self.kind == "lattice":
            if abs(self.lattice.mean) > 1e-12 * max(1.0, self.lattice.h):
                raise ParameterError(f"lattice family must be centered, mean={self.lattice.mean!r}")
            exact_var = self.lattice.variance
            shift = 0.0
        elif self.kind == "symmetric":
            exact_var = weibull_raw_moment(p.epsilon, p.q, 2)
            shift = 0.0
        else:
            shift = weibull_mean(p.epsilon, p.q)
            exact_var = weibull_raw_moment(p.epsilon, p.q, 2) - shift**2
        if not math.isclose(p.sigma2, exact_var, rel_tol=1e-9):
            raise ParameterError(
                f"sigma2={p.sigma2!r} does not match the family variance {exact_var!r}; "
                "build families with SemiexpFamily.weibull or SemiexpFamily.from_lattice"
            )
        object.__setattr__(self, "shift", float(shift))

    @classmethod
    def weibull(cls, kind, epsilon, q, gamma=1.0):
        """Continuous family whose ``sigma2`` is the exact variance."""
        if kind not in ("one_sided_centered", "symmetric"):
            raise ParameterError(f"weibull families are one_sided_centered or symmetric, not {kind!r}")
        check_open_unit("epsilon", epsilon)
        check_positive("q", q)
        second = weibull_raw_moment(epsilon, q, 2)
        if kind == "one_sided_centered":
            second -= weibull_mean(epsilon, q) ** 2
        return cls(kind, ModelParams(epsilon, q, second, gamma))

    @classmethod
    def from_lattice(cls, dist, epsilon=0.5, q=1.0, gamma=1.0):
        return cls("lattice", ModelParams(epsilon, q, dist.variance, gamma), dist)

    @property
    def k(self):
        """Weibull shape ``1 - eps``."""
        return 1.0 - self.params.epsilon

    @property
    def tail_log_constant(self):
        """``log P(Y >= t) + q t**(1-eps)`` for large t: the sign-mass term."""
        return math.log(0.5) if self.kind == "symmetric" else 0.0

    @property
    def lower_bound(self):
        if self.kind == "one_sided_centered":
            return -self.shift
        if self.kind == "lattice":
            return self.lattice.min_point
        return -math.inf

    # Distribution functions, vectorised over t.

    def logsf(self, t):
        """``log P(Y >= t)``."""
        t = np.asarray(t, dtype=np.float64)
        p = self.params
        if self.kind == "lattice":
            with np.errstate(divide="ignore"):
                return np.log(self.sf(t))
        if self.kind == "symmetric":
            a = p.q * np.abs(t) ** self.k
            return np.where(t >= 0, math.log(0.5) - a, np.log1p(-0.5 * np.exp(-a)))
        s = t + self.shift
        return np.where(s > 0, -p.q * np.maximum(s, 0.0) ** self.k, 0.0)

    def sf(self, t):
        """``P(Y >= t)``."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "lattice":
            tail = np.concatenate([np.cumsum(self.lattice.masses[::-1])[::-1], [0.0]])
            idx = np.ceil((t - self.lattice.offset) / self.lattice.h - 1e-9)
            idx = np.clip(idx, 0, self.lattice.size).astype(np.int64)
            return np.minimum(tail[idx], 1.0)
        return np.exp(self.logsf(t))

    def cdf(self, t):
        """``P(Y <= t)`` (continuous kinds only)."""
        if self.kind == "lattice":
            raise ParameterError("cdf is only provided for continuous families")
        return -np.expm1(self.logsf(t))

    def draw(self, rng, size):
        """Draw an array of shape ``size`` from ``rng``."""
        p = self.params
        if self.kind == "lattice":
            cum = np.cumsum(self.lattice.masses)
            idx = np.searchsorted(cum, rng.random(size) * cum[-1], side="right")
            idx = np.minimum(idx, self.lattice.size - 1)
            return self.lattice.offset + self.lattice.h * idx
        u = rng.random(size)
        np.subtract(1.0, u, out=u)
        np.log(u, out=u)
        np.multiply(u, -1.0 / p.q, out=u)
        w = np.power(u, 1.0 / self.k, out=u)
        if self.kind == "symmetric":
            sign = rng.integers(0, 2, size, dtype=np.int8)
            np.multiply(w, 1 - 2 * sign, out=w)
            return w
        w -= self.shift
        return w

    def to_dict(self):
        d = {
            "kind": self.kind,
            "epsilon": self.params.epsilon,
            "q": self.params.q,
            "sigma2": self.params.sigma2,
            "gamma": self.params.gamma,
        }
        if self.lattice is not None:
            d.update(self.lattice.to_dict())
        return d


def family_to_dict(family, trunc=None):
    """JSON-ready description of a family and optional truncation."""
    d = family.to_dict()
    if trunc is not None:
        d.update(beta=trunc.beta, c=trunc.c, n_index=trunc.n_index)
    return d


def family_from_dict(d):
    """Inverse of :func:`family_to_dict`; returns ``(family, trunc_or_None)``."""
    kind = d.get("kind")
    gamma = d.get("gamma", 1.0)
    if kind == "lattice":
        dist = LatticeDist(d["h"], d["offset"], np.asarray(d["masses"], dtype=float))
        family = SemiexpFamily.from_lattice(dist, d.get("epsilon", 0.5), d.get("q", 1.0), gamma)
    else:
        family = SemiexpFamily.weibull(kind, d["epsilon"], d["q"], gamma)
    trunc = None
    if "beta" in d or "c" in d:
        trunc = TruncationParams(d["beta"], d["c"], d.get("n_index", 1))
    return family, trunc


def _cutoff(trunc, N):
    return math.inf if trunc is None else trunc.cutoff(N)


def acceptance_probability(family, cutoff):
    """``P(Y < cutoff)``."""
    if math.isinf(cutoff):
        return 1.0
    return float(1.0 - family.sf(cutoff))


def sample_base(family, seed, count):
    """``count`` i.i.d. draws of the centered base variable."""
    count = check_positive_int("count", count)
    out = np.empty(count)
    pos = 0
    batch = 0
    while pos < count:
        x = family.draw(batch_generator(seed, batch), BATCH_SIZE)
        take = min(count - pos, BATCH_SIZE)
        out[pos:pos + take] = x[:take]
        pos += take
        batch += 1
    return out


def sample_truncated(family, trunc, N, seed, count):
    """Draws of ``Y`` conditioned on ``Y < N**beta * c``, by rejection.

    The accepted draws are the base stream of :func:`sample_base` with the
    rejected values removed, so a cap above every draw reproduces it exactly.
    """
    count = check_positive_int("count", count)
    cutoff = trunc.cutoff(N)
    acc = acceptance_probability(family, cutoff)
    if acc < MIN_ACCEPTANCE:
        raise DegenerateTruncationError(
            f"P(Y < {cutoff:g}) = {acc:.3g} is below {MIN_ACCEPTANCE:g}"
        )
    out = np.empty(count)
    pos = 0
    batch = 0
    while pos < count:
        x = family.draw(batch_generator(seed, batch), BATCH_SIZE)
        x = x[x < cutoff]
        take = min(count - pos, x.size)
        out[pos:pos + take] = x[:take]
        pos += take
        batch += 1
    return out


def tail_log_prob(family, y, trunc=None, N=None):
    """Exact ``log P(Y_n >= y)``, conditioned on the cap when ``trunc`` is set."""
    y = check_positive("y", y, allow_inf=False)
    if trunc is None:
        return float(family.logsf(y))
    cutoff = trunc.cutoff(N)
    if y >= cutoff:
        return -math.inf
    ls_y = float(family.logsf(y))
    ls_c = float(family.logsf(cutoff))
    if ls_y == -math.inf:
        return -math.inf
    num = ls_y + math.log(-math.expm1(ls_c - ls_y)) if ls_c < ls_y else -math.inf
    return num - math.log1p(-math.exp(ls_c))


# Moments.

def _quad(fun, a, b, points=None):
    kw = dict(epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=400)
    if points is not None and math.isfinite(b):
        kw["points"] = points
        val, err = integrate.quad(fun, a, b, **kw)
    elif points is not None:
        val1, err1 = integrate.quad(fun, a, points[0], **kw)
        val2, err2 = integrate.quad(fun, points[0], b, **kw)
        val, err = val1 + val2, err1 + err2
    else:
        val, err = integrate.quad(fun, a, b, **kw)
    if not err <= QUAD_ABS_TOL + 1e-11 * abs(val):
        raise NumericError(
            f"quadrature on [{a:g}, {b:g}] did not converge: value={val!r}, error estimate={err!r}"
        )
    return val


def _magnitude_expectation(g, q, k, w_lo=0.0, w_hi=math.inf, kink=None):
    """``E[g(W); w_lo <= W < w_hi]`` through the substitution ``a = q W**k``."""
    a_lo = q * w_lo**k
    a_hi = q * w_hi**k if math.isfinite(w_hi) else math.inf
    if a_hi <= a_lo:
        return 0.0

    def integrand(a):
        return g((a / q) ** (1.0 / k)) * math.exp(-a)

    points = None
    if kink is not None and kink > 0:
        a_kink = q * kink**k
        if a_lo < a_kink < a_hi:
            points = [a_kink]
    return _quad(integrand, a_lo, a_hi, points)


def _lattice_moments(dist, cutoff, gamma):
    x = dist.support
    m = dist.masses.copy()
    if math.isfinite(cutoff):
        m[x >= cutoff] = 0.0
    z = m.sum()
    if z <= 0:
        raise DegenerateTruncationError("truncation removes the whole lattice support")
    m /= z
    mean = float(np.dot(m, x))
    var = float(np.dot(m, (x - mean) ** 2))
    absm = float(np.dot(m, np.abs(x) ** (2.0 + gamma)))
    return MomentReport(mean, var, absm, cutoff)


def moments(family, trunc=None, N=None):
    """Mean, variance and ``E|Y|**(2+gamma)`` of the (possibly capped) law."""
    p = family.params
    cutoff = _cutoff(trunc, N)
    order = 2.0 + p.gamma
    if family.kind == "lattice":
        return _lattice_moments(family.lattice, cutoff, p.gamma)
    q, k = p.q, family.k
    if family.kind == "symmetric":
        if math.isinf(cutoff):
            return MomentReport(0.0, weibull_raw_moment(p.epsilon, q, 2),
                                weibull_raw_moment(p.epsilon, q, order), cutoff)
        if cutoff > 0:
            z = 1.0 - 0.5 * math.exp(-q * cutoff**k)
            m1 = 0.5 * (-weibull_raw_moment(p.epsilon, q, 1)
                        + _magnitude_expectation(lambda w: w, q, k, 0.0, cutoff))
            m2 = 0.5 * (weibull_raw_moment(p.epsilon, q, 2)
                        + _magnitude_expectation(lambda w: w * w, q, k, 0.0, cutoff))
            ma = 0.5 * (weibull_raw_moment(p.epsilon, q, order)
                        + _magnitude_expectation(lambda w: w**order, q, k, 0.0, cutoff))
        else:
            lo = -cutoff
            z = 0.5 * math.exp(-q * lo**k)
            if z < MIN_ACCEPTANCE:
                raise DegenerateTruncationError(f"P(Y < {cutoff:g}) = {z:.3g}")
            m1 = -0.5 * _magnitude_expectation(lambda w: w, q, k, lo)
            m2 = 0.5 * _magnitude_expectation(lambda w: w * w, q, k, lo)
            ma = 0.5 * _magnitude_expectation(lambda w: w**order, q, k, lo)
        mean = m1 / z
        return MomentReport(mean, m2 / z - mean * mean, ma / z, cutoff)

    mu = family.shift
    if math.isinf(cutoff):
        absm = _magnitude_expectation(lambda w: abs(w - mu) ** order, q, k, kink=mu)
        return MomentReport(0.0, p.sigma2, absm, cutoff)
    w_hi = cutoff + mu
    if w_hi <= 0:
        raise DegenerateTruncationError(f"cutoff {cutoff:g} is below the support")
    z = -math.expm1(-q * w_hi**k)
    if z < MIN_ACCEPTANCE:
        raise DegenerateTruncationError(f"P(Y < {cutoff:g}) = {z:.3g}")
    mean = _magnitude_expectation(lambda w: w - mu, q, k, 0.0, w_hi, kink=mu) / z
    m2 = _magnitude_expectation(lambda w: (w - mu) ** 2, q, k, 0.0, w_hi, kink=mu) / z
    absm = _magnitude_expectation(lambda w: abs(w - mu) ** order, q, k, 0.0, w_hi, kink=mu) / z
    return MomentReport(mean, m2 - mean * mean, absm, cutoff)


# Assumption audit.

@dataclass(frozen=True)
class AuditRow:
    n: int
    h1_ratio_min: float
    h1_ratio_max: float
    h1_raw_min: float
    h1_raw_max: float
    censored: int
    h2_ratio: float
    h2plus_ratio: float


@dataclass(frozen=True)
class AuditReport:
    alpha: float
    rows: tuple
    verdicts: dict
    h1_band: tuple = (0.9, 1.1)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "h1_band": list(self.h1_band),
            "verdicts": dict(self.verdicts),
            "rows": [r.__dict__.copy() for r in self.rows],
        }


def _vanishing(values):
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return bool(v.size == 1 and v[0] == 0.0)
    return bool(np.all(np.diff(v) <= 0) and v[-1] < v[0])


def audit_assumptions(family, alpha, n_grid, trunc=None, y_points=64, h1_band=(0.9, 1.1)):
    """Finite-grid diagnostics for the tail, variance and moment hypotheses.

    For every ``N`` in ``n_grid`` the tail ratio
    ``log P(Y_N >= y) / (-q y**(1-eps))`` is evaluated on a geometric grid
    of ``y`` spanning ``[N**(alpha*eps), N**alpha]``.  Two versions are
    reported: the raw ratio and one with the constant sign-mass term
    (``log 1/2`` for the symmetric family) removed.  Points at or beyond the
    truncation cap are counted as censored and carry ratio ``-inf``.
    """
    n_grid = [check_positive_int("n", n) for n in n_grid]
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ParameterError("n_grid must be nonempty and strictly increasing")
    alpha = float(alpha)
    p = family.params
    rows = []
    for N in n_grid:
        ys = np.geomspace(float(N) ** (alpha * p.epsilon), float(N) ** alpha, y_points)
        ref = -p.q * ys**family.k
        logs = np.array([tail_log_prob(family, y, trunc, N) for y in ys])
        censored = np.isneginf(logs)
        raw = np.where(censored, -np.inf, logs / ref)
        corr = np.where(censored, -np.inf, (logs - family.tail_log_constant) / ref)
        live = ~censored
        mom = moments(family, trunc, N)
        h2 = mom.second_moment / float(N) ** (alpha * (1.0 + p.epsilon) - 1.0)
        h2p = mom.abs_moment_2_gamma / float(N) ** (p.gamma * (1.0 - alpha))
        rows.append(AuditRow(
            n=N,
            h1_ratio_min=float(corr[live].min()) if live.any() else -math.inf,
            h1_ratio_max=float(corr[live].max()) if live.any() else -math.inf,
            h1_raw_min=float(raw[live].min()) if live.any() else -math.inf,
            h1_raw_max=float(raw[live].max()) if live.any() else -math.inf,
            censored=int(censored.sum()),
            h2_ratio=float(h2),
            h2plus_ratio=float(h2p),
        ))
    last = rows[-1]
    lo, hi = h1_band
    h1_ok = last.censored < y_points and lo <= last.h1_ratio_min and last.h1_ratio_max <= hi
    verdicts = {
        "H1": bool(h1_ok),
        "H2": _vanishing([r.h2_ratio for r in rows]),
        "H2+": _vanishing([r.h2plus_ratio for r in rows]),
    }
    return AuditReport(alpha, tuple(rows), verdicts, tuple(h1_band))
