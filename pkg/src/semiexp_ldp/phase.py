"""Regime classification over the (alpha, beta) plane for the capped model.

Summands are capped at ``N**beta * c`` and deviations are measured at
``N**alpha * y``.  With ``b = 1/(1+eps)`` the plane splits into three
vertical bands, ``beta > b``, ``beta < b`` and ``beta = b``; each band is cut
by lines in ``alpha``.  Equalities are detected with a relative tolerance of
``1e-12`` so that symbolically specified boundaries (``alpha = 1/(1+eps)``)
survive floating point.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, ParameterError, check_positive, close_to

REGIMES = ("gaussian", "transition1", "max_jump", "transition2", "trunc_max_jump", "transition3", "t0", "trivial")

RATE_ID = {
    "gaussian": "gaussian",
    "transition1": "transition",
    "max_jump": "max_jump",
    "transition2": "transition2",
    "trunc_max_jump": "trunc_max_jump",
    "transition3": "transition3",
    "t0": "t0",
    "trivial": None,
}

BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class RegimeInfo:
    regime: str
    speed_exponent: float | None
    rate_id: str | None
    y_condition: str | None = None

    def describe(self):
        if self.speed_exponent is None:
            text = f"{self.regime}, probability zero"
        else:
            text = f"{self.regime}, speed {self.speed_exponent:.12g}"
        if self.y_condition:
            text += f" ({self.y_condition})"
        return text


def speed_exponent(regime, alpha, beta, epsilon):
    if regime == "gaussian":
        return 2 * alpha - 1
    if regime in ("transition1", "t0"):
        return (1 - epsilon) / (1 + epsilon)
    if regime in ("max_jump", "transition2"):
        return alpha * (1 - epsilon)
    if regime == "trunc_max_jump":
        return alpha - beta * epsilon
    if regime == "transition3":
        return 1 - 2 * beta * epsilon
    return None


def _info(regime, alpha, beta, epsilon, y_condition=None):
    return RegimeInfo(regime, speed_exponent(regime, alpha, beta, epsilon), RATE_ID[regime], y_condition)


def classify(alpha, beta, model, c, y=None):
    """Regime, LDP speed exponent and rate function for one configuration.

    ``beta`` may be ``math.inf`` for the uncapped model.  On the line
    ``alpha = beta + 1`` the answer depends on ``y``: with ``y`` given it
    is resolved (``y < c`` keeps the capped max-jump regime, otherwise the
    event is impossible); without it the capped regime is returned with
    ``y_condition`` describing the split.
    """
    alpha = float(alpha)
    beta = check_positive("beta", beta, allow_inf=True)
    c = check_positive("c", c)
    eps = model.epsilon
    if not alpha > 0.5 or close_to(alpha, 0.5, BOUNDARY_RTOL):
        raise DomainError(f"alpha must exceed 1/2, got {alpha!r}")
    b_star = 1.0 / (1.0 + eps)

    def eq(a, b):
        return close_to(a, b, BOUNDARY_RTOL)

    def below(a, b):
        return a < b and not eq(a, b)

    if math.isfinite(beta):
        top = beta + 1.0
        if eq(alpha, top):
            if y is None:
                return _info("trunc_max_jump", alpha, beta, eps, y_condition=f"trunc_max_jump if y < {c:.12g}, trivial otherwise")
            return _info("trunc_max_jump" if y < c else "trivial", alpha, beta, eps)
        if not below(alpha, top):
            return _info("trivial", alpha, beta, eps)

    if math.isinf(beta) or (beta > b_star and not eq(beta, b_star)):
        if below(alpha, b_star):
            return _info("gaussian", alpha, beta, eps)
        if eq(alpha, b_star):
            return _info("transition1", alpha, beta, eps)
        if math.isinf(beta) or below(alpha, beta):
            return _info("max_jump", alpha, beta, eps)
        if eq(alpha, beta):
            return _info("transition2", alpha, beta, eps)
        return _info("trunc_max_jump", alpha, beta, eps)

    if eq(beta, b_star):
        if below(alpha, b_star):
            return _info("gaussian", alpha, beta, eps)
        if eq(alpha, b_star):
            return _info("t0", alpha, beta, eps)
        return _info("trunc_max_jump", alpha, beta, eps)

    edge = 1.0 - beta * eps
    if below(alpha, edge):
        return _info("gaussian", alpha, beta, eps)
    if eq(alpha, edge):
        return _info("transition3", alpha, beta, eps)
    return _info("trunc_max_jump", alpha, beta, eps)


def boundary_polylines(epsilon, alpha_range, beta_range, n=64):
    """The regime boundaries clipped to the plotting window."""
    b_star = 1.0 / (1.0 + epsilon)
    a_lo, a_hi = alpha_range
    b_lo, b_hi = beta_range
    lines = []

    def add(name, betas, alphas):
        pts = [(float(a), float(b)) for a, b in zip(alphas, betas)
               if a_lo <= a <= a_hi and b_lo <= b <= b_hi]
        if len(pts) >= 2:
            lines.append({"name": name, "points": [{"alpha": a, "beta": b} for a, b in pts]})

    right = np.linspace(max(b_star, b_lo), b_hi, n)
    left = np.linspace(b_lo, min(b_star, b_hi), n)
    full = np.linspace(b_lo, b_hi, n)
    add("alpha=1/(1+eps)", right, np.full(n, b_star))
    add("alpha=beta", right, right)
    add("alpha=1-beta*eps", left, 1 - left * epsilon)
    add("alpha=beta+1", full, full + 1)
    return lines


def diagram_grid(model, c, alpha_range, beta_range, resolution, y=None):
    """Regime label for each node of a ``resolution x resolution`` grid.

    Returns ``(rows, polylines)`` where ``rows`` is a list of
    ``(alpha, beta, regime)``.  Nodes on ``alpha = beta + 1`` are labelled
    ``trunc_max_jump|trivial`` unless ``y`` is supplied.
    """
    resolution = int(resolution)
    if resolution < 2:
        raise ParameterError("resolution must be at least 2")
    a_lo, a_hi = map(float, alpha_range)
    b_lo, b_hi = map(float, beta_range)
    if not (0.5 < a_lo <= a_hi) or not (0 < b_lo <= b_hi):
        raise ParameterError("need 1/2 < alpha_min <= alpha_max and 0 < beta_min <= beta_max")
    rows = []
    for alpha in np.linspace(a_lo, a_hi, resolution):
        for beta in np.linspace(b_lo, b_hi, resolution):
            info = classify(alpha, beta, model, c, y)
            label = "trunc_max_jump|trivial" if info.y_condition else info.regime
            rows.append((float(alpha), float(beta), label))
    return rows, boundary_polylines(model.epsilon, (a_lo, a_hi), (b_lo, b_hi))


def grid_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("alpha", "beta", "regime"))
    for a, b, r in rows:
        w.writerow((repr(a), repr(b), r))
    return buf.getvalue()


def grid_from_csv(text):
    reader = csv.reader(io.StringIO(text))
    if tuple(next(reader)) != ("alpha", "beta", "regime"):
        raise ParameterError("unexpected diagram header")
    return [(float(a), float(b), r) for a, b, r in reader]


def polylines_to_json(lines):
    return json.dumps(lines)
