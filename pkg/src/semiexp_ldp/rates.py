"""Closed-form rate functions, thresholds and a brute-force oracle.

Rate identifiers:

=================  ==========================================================
``gaussian``       ``y**2 / (2 sigma2)``
``max_jump``       ``q y**(1-eps)``
``transition``     ``inf_theta q (theta y)**(1-eps) + (1-theta)**2 y**2 / (2 sigma2)``
``transition2``    ``q (floor(y/c) c**(1-eps) + (y - floor(y/c) c)**(1-eps))``
``trunc_max_jump`` ``q y c**(-eps)``
``transition3``    ``inf_t q (1-t) y c**(-eps) + t**2 y**2 / (2 sigma2)``
``t0``             saturated jumps of size ``c`` plus the ``transition`` rate
=================  ==========================================================
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, NumericError, ParameterError, check_nonnegative, check_positive, close_to
from .model import ModelParams

RATE_IDS = ("gaussian", "max_jump", "transition", "transition2", "trunc_max_jump", "transition3", "t0")
ALIASES = {"transition1": "transition", "I": "transition", "I1": "transition", "I2": "transition2",
           "I3": "transition3"}
NEEDS_C = ("transition2", "trunc_max_jump", "transition3", "t0")

THETA_MAX_ITER = 200
THETA_RESIDUAL_TOL = 1e-12
C0_AGREEMENT_TOL = 1e-8


@dataclass(frozen=True)
class RateParams:
    model: ModelParams
    c: float | None = None

    def __post_init__(self):
        if self.c is not None:
            object.__setattr__(self, "c", check_positive("c", self.c))

    @classmethod
    def of(cls, epsilon, q, sigma2, c=None, gamma=1.0):
        return cls(ModelParams(epsilon, q, sigma2, gamma), c)

    def need_c(self, what):
        if self.c is None:
            raise ParameterError(f"{what} needs the truncation constant c")
        return self.c


@dataclass(frozen=True)
class Thresholds:
    y0: float
    y1: float
    y3: float | None = None
    c0: float | None = None
    y01: float | None = None
    y02: float | None = None


@dataclass(frozen=True)
class RateEvaluation:
    y: float
    value: float
    branch: str
    theta: float | None = None
    jumps: int | None = None


def canonical_rate_id(rate_id):
    rid = ALIASES.get(rate_id, rate_id)
    if rid not in RATE_IDS:
        raise ParameterError(f"unknown rate id {rate_id!r}; expected one of {RATE_IDS}")
    return rid


def thresholds(params):
    m = params.model
    eps, q, s2 = m.epsilon, m.q, m.sigma2
    y0 = ((1 - eps**2) * (1 + 1 / eps) ** eps * q * s2) ** (1 / (1 + eps))
    y1 = (1 + eps) * (q * s2 / (2 * eps) ** eps) ** (1 / (1 + eps))
    if params.c is None:
        return Thresholds(y0, y1)
    c = params.c
    return Thresholds(
        y0,
        y1,
        y3=q * s2 * c**-eps,
        c0=(2 * eps * q * s2) ** (1 / (1 + eps)),
        y01=c / 2 + q * s2 * c**-eps,
        y02=c + (1 - eps) * q * s2 * c**-eps,
    )


def _check_y(y):
    return check_nonnegative("y", y)


def gaussian_rate(params, y):
    y = _check_y(y)
    return RateEvaluation(y, y * y / (2 * params.model.sigma2), "gaussian")


def max_jump_rate(params, y):
    y = _check_y(y)
    m = params.model
    return RateEvaluation(y, m.q * y ** (1 - m.epsilon), "max_jump")


def first_order_residual(params, y, theta):
    """``(1-theta) theta**eps - (1-eps) q sigma2 / y**(1+eps)``."""
    m = params.model
    return (1 - theta) * theta**m.epsilon - (1 - m.epsilon) * m.q * m.sigma2 / y ** (1 + m.epsilon)


def theta_root(params, y):
    """Largest root in ``[0, 1]`` of the first-order condition, for ``y > y0``.

    ``theta -> (1-theta) theta**eps`` decreases strictly on
    ``[eps/(1+eps), 1]``, so plain bisection on that bracket is exact.
    """
    m = params.model
    eps = m.epsilon
    y = float(y)
    if not y > thresholds(params).y0:
        raise DomainError(f"theta_root needs y > y0, got y={y!r}")
    target = (1 - eps) * m.q * m.sigma2 / y ** (1 + eps)
    lo, hi = eps / (1 + eps), 1.0
    if (1 - lo) * lo**eps <= target:
        return lo
    for _ in range(THETA_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if (1 - mid) * mid**eps > target:
            lo = mid
        else:
            hi = mid
    theta = min((lo, hi), key=lambda t: abs((1 - t) * t**eps - target))
    if abs((1 - theta) * theta**eps - target) >= THETA_RESIDUAL_TOL:
        raise NumericError(f"theta_root residual too large at y={y!r}")
    return theta


def _transition_objective(m, theta, y):
    return m.q * (theta * y) ** (1 - m.epsilon) + (1 - theta) ** 2 * y * y / (2 * m.sigma2)


def transition_rate(params, y):
    y = _check_y(y)
    m = params.model
    if y <= thresholds(params).y1:
        return RateEvaluation(y, y * y / (2 * m.sigma2), "transition_gaussian", theta=0.0)
    theta = theta_root(params, y)
    return RateEvaluation(y, _transition_objective(m, theta, y), "transition_jump", theta=theta)


def trunc_transition2_rate(params, y):
    y = _check_y(y)
    c = params.need_c("transition2")
    m = params.model
    k = math.floor(y / c)
    rest = max(y - k * c, 0.0)
    value = m.q * (k * c ** (1 - m.epsilon) + rest ** (1 - m.epsilon))
    return RateEvaluation(y, value, f"transition2_k{k}", jumps=k)


def trunc_max_jump_rate(params, y):
    y = _check_y(y)
    c = params.need_c("trunc_max_jump")
    m = params.model
    return RateEvaluation(y, m.q * y * c**-m.epsilon, "trunc_max_jump")


def transition3_rate(params, y):
    y = _check_y(y)
    c = params.need_c("transition3")
    m = params.model
    y3 = thresholds(params).y3
    if y <= y3:
        return RateEvaluation(y, y * y / (2 * m.sigma2), "transition3_gaussian", theta=1.0)
    value = m.q * y / c**m.epsilon - m.q**2 * m.sigma2 / (2 * c ** (2 * m.epsilon))
    return RateEvaluation(y, value, "transition3_linear", theta=y3 / y)


def _saturated_count(y, y_first, c):
    return max(math.floor((y - y_first) / c) + 1, 0)


def _t0_first(params, y, th):
    m, c = params.model, params.c
    k = _saturated_count(y, th.y01, c)
    rest = y - k * c
    value = m.q * k * c ** (1 - m.epsilon) + rest * rest / (2 * m.sigma2)
    return RateEvaluation(y, value, f"t0_1_k{k}", theta=0.0, jumps=k)


def _t0_second(params, y, th):
    m, c = params.model, params.c
    k = _saturated_count(y, th.y02, c)
    inner = transition_rate(params, y - k * c)
    value = m.q * k * c ** (1 - m.epsilon) + inner.value
    return RateEvaluation(y, value, f"t0_2_k{k}", theta=inner.theta, jumps=k)


def t0_rate(params, y):
    """Rate at ``alpha = beta = 1/(1+eps)``; branch depends on ``c`` vs ``c0``."""
    y = _check_y(y)
    params.need_c("t0")
    th = thresholds(params)
    if close_to(params.c, th.c0):
        first, second = _t0_first(params, y, th), _t0_second(params, y, th)
        if abs(first.value - second.value) > C0_AGREEMENT_TOL:
            raise NumericError(f"t0 branches disagree at c = c0, y={y!r}")
        return first
    if params.c < th.c0:
        return _t0_first(params, y, th)
    return _t0_second(params, y, th)


RATE_FUNCTIONS = {
    "gaussian": gaussian_rate,
    "max_jump": max_jump_rate,
    "transition": transition_rate,
    "transition2": trunc_transition2_rate,
    "trunc_max_jump": trunc_max_jump_rate,
    "transition3": transition3_rate,
    "t0": t0_rate,
}


def evaluate(rate_id, params, y):
    return RATE_FUNCTIONS[canonical_rate_id(rate_id)](params, y)


def rate_values(rate_id, params, ys):
    """Vector of rate values on ``ys``."""
    fn = RATE_FUNCTIONS[canonical_rate_id(rate_id)]
    return np.array([fn(params, y).value for y in np.ravel(ys)])


# Brute-force oracle.

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_CHUNK = 1 << 21


def _golden(func, rows, lo, hi, width):
    a, b = lo.copy(), hi.copy()
    while np.max(b - a) > width:
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        left = func(c, rows) < func(d, rows)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    return func(0.5 * (a + b), rows)


def _grid_min(func, n_rows, resolution, width=1e-12):
    """Row-wise minimum over ``t in [0, 1]`` of ``func(t, row)``.

    A uniform scan locates every local minimum of the grid; the two best are
    polished by golden section on their neighbouring cells.
    """
    resolution = max(int(resolution), 3)
    grid = np.linspace(0.0, 1.0, resolution)
    best = np.empty(n_rows)
    step = max(1, _CHUNK // resolution)
    for start in range(0, n_rows, step):
        rows = np.arange(start, min(n_rows, start + step))
        vals = func(grid[None, :], rows[:, None])
        out = vals.min(axis=1)
        padded = np.pad(vals, ((0, 0), (1, 1)), constant_values=np.inf)
        is_min = (vals <= padded[:, :-2]) & (vals <= padded[:, 2:]) & np.isfinite(vals)
        masked = np.where(is_min, vals, np.inf)
        order = np.argsort(masked, axis=1)[:, :2]
        for j in range(order.shape[1]):
            idx = order[:, j]
            ok = np.isfinite(masked[np.arange(rows.size), idx])
            if not ok.any():
                continue
            sel = rows[ok]
            i = idx[ok]
            lo = grid[np.maximum(i - 1, 0)]
            hi = grid[np.minimum(i + 1, resolution - 1)]
            refined = _golden(func, sel, lo, hi, width)
            out[ok] = np.minimum(out[ok], refined)
        best[rows - rows[0] + start] = out
    return best


def rate_oracle_grid(rate_id, params, y, grid_resolution=1000):
    """Independent brute-force evaluation of a rate function.

    Each rate is recomputed from a variational description rather than its
    closed form: the ``transition``/``transition3`` infima over the jump
    share; ``transition2`` and ``t0`` by exhaustive search over the number
    of saturated jumps ``k`` in ``[0, ceil(y/c) + 1]`` with an inner
    continuous minimisation; ``gaussian`` as the Legendre transform of the
    Gaussian cumulant; ``max_jump`` and ``trunc_max_jump`` as contractions
    over the jump size and the saturation level.  Accepts scalar or array
    ``y``.
    """
    rid = canonical_rate_id(rate_id)
    scalar = np.ndim(y) == 0
    ys = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if np.any(ys < 0) or not np.all(np.isfinite(ys)):
        raise ParameterError("oracle needs finite y >= 0")
    m = params.model
    q, eps, s2 = m.q, m.epsilon, m.sigma2
    if rid in NEEDS_C:
        c = params.need_c(rid)

    if rid == "transition":
        def f(t, r):
            yy = ys[r]
            return q * (t * yy) ** (1 - eps) + (1 - t) ** 2 * yy * yy / (2 * s2)
        out = _grid_min(f, ys.size, grid_resolution)
    elif rid == "transition3":
        def f(t, r):
            yy = ys[r]
            return q * (1 - t) * yy * c**-eps + t * t * yy * yy / (2 * s2)
        out = _grid_min(f, ys.size, grid_resolution)
    elif rid == "gaussian":
        def f(t, r):
            lam = t * 2 * ys[r] / s2
            return -(lam * ys[r] - s2 * lam * lam / 2)
        out = -_grid_min(f, ys.size, grid_resolution)
    elif rid == "max_jump":
        def f(t, r):
            return q * (ys[r] * (1 + t)) ** (1 - eps)
        out = _grid_min(f, ys.size, grid_resolution)
    elif rid == "trunc_max_jump":
        def f(t, r):
            s = c * np.maximum(t, 1e-300)
            return q * ys[r] * s**-eps
        out = _grid_min(f, ys.size, grid_resolution)
    else:
        kmax = np.ceil(ys / c).astype(np.int64) + 1
        row_y = np.repeat(ys, kmax + 1)
        row_k = np.concatenate([np.arange(k + 1) for k in kmax]).astype(np.float64)
        rest = row_y - row_k * c
        feasible = rest >= 0
        rest = np.maximum(rest, 0.0)
        base = q * row_k * c ** (1 - eps)
        if rid == "transition2":
            span = np.minimum(c, rest)

            def f(t, r):
                u = t * span[r]
                v = rest[r] - u
                val = base[r] + q * (u ** (1 - eps) + v ** (1 - eps))
                return np.where(v <= c * (1 + 1e-12), val, np.inf)
        else:
            theta_max = np.where(rest > c, c / np.where(rest > 0, rest, 1.0), 1.0)

            def f(t, r):
                th = t * theta_max[r]
                rr = rest[r]
                return base[r] + q * (th * rr) ** (1 - eps) + (1 - th) ** 2 * rr * rr / (2 * s2)
        vals = _grid_min(f, row_y.size, grid_resolution)
        vals = np.where(feasible, vals, np.inf)
        splits = np.cumsum(kmax + 1)[:-1]
        out = np.array([seg.min() for seg in np.split(vals, splits)])
    out = np.where(ys == 0, 0.0, out)
    return float(out[0]) if scalar else out


# Curves.

CURVE_HEADER = ("y", "value", "theta", "branch", "jumps")


def emit_curve(rate_id, params, y_min, y_max, n_points):
    """Rate evaluations on the uniform grid ``y_min + (y_max-y_min) i/(n-1)``."""
    y_min, y_max = float(y_min), float(y_max)
    if not (0 <= y_min < y_max) or not math.isfinite(y_max):
        raise ParameterError(f"need 0 <= y_min < y_max, got [{y_min!r}, {y_max!r}]")
    n_points = int(n_points)
    if n_points < 2:
        raise ParameterError("n_points must be at least 2")
    fn = RATE_FUNCTIONS[canonical_rate_id(rate_id)]
    span = y_max - y_min
    return [fn(params, y_min + span * i / (n_points - 1)) for i in range(n_points)]


def _fmt(x):
    return "" if x is None else f"{x:.12g}"


def curve_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for r in rows:
        w.writerow([_fmt(r.y), _fmt(r.value), _fmt(r.theta), r.branch, "" if r.jumps is None else r.jumps])
    return buf.getvalue()


def curve_from_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CURVE_HEADER:
        raise ParameterError(f"unexpected curve header {header!r}")
    rows = []
    for y, value, theta, branch, jumps in reader:
        rows.append(RateEvaluation(
            float(y), float(value), branch,
            theta=float(theta) if theta else None,
            jumps=int(jumps) if jumps else None,
        ))
    return rows
