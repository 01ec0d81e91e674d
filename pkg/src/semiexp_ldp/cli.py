"""Command-line front end: ``semiexp-ldp {rate,phase,estimate,verify}``.

Numeric flags accept rational expressions such as ``1/(1+eps)`` that may
refer to ``eps`` (or ``epsilon``), ``q``, ``sigma2``, ``c`` and ``beta``; they
are evaluated exactly with :class:`fractions.Fraction` before conversion to
float.  Relative ``--out`` paths land in ``$SEMIEXP_LDP_OUTDIR`` when it is
set.  Exit status: 0 success, 1 failed verification, 2 bad usage or
parameters.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import phase, rates
from ._lattice import LatticeDist
from ._validation import DomainError, NumericError, ParameterError, ResourceError
from .model import ModelParams, SemiexpFamily, TruncationParams

OUTDIR_ENV = "SEMIEXP_LDP_OUTDIR"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
NAMES = {"eps": "eps", "epsilon": "eps", "q": "q", "sigma2": "sigma2", "c": "c", "beta": "beta"}
RESOLVE_ORDER = ("eps", "q", "sigma2", "c", "beta")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# Rational expressions.

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}


def evaluate_expression(text, env=None):
    """Evaluate an arithmetic expression exactly where possible.

    Decimal literals become fractions, so ``0.1 + 0.2 == 3/10``.  Powers
    with non-integer exponents fall back to float.
    """
    env = env or {}
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ParameterError(f"cannot parse expression {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return Fraction(repr(node.value)) if isinstance(node.value, float) else Fraction(node.value)
        if isinstance(node, ast.Name):
            if node.id in ("inf", "infinity"):
                return math.inf
            key = NAMES.get(node.id)
            if key is None:
                raise ParameterError(f"unknown name {node.id!r} in {text!r}")
            if key not in env:
                raise ParameterError(f"{node.id!r} in {text!r} is not set")
            return env[key]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Pow) and not (isinstance(b, Fraction) and b.denominator == 1):
                a, b = float(a), float(b)
            try:
                return _BINOPS[type(node.op)](a, b)
            except ZeroDivisionError as exc:
                raise ParameterError(f"division by zero in {text!r}") from exc
        raise ParameterError(f"unsupported syntax in {text!r}")

    return ev(tree)


def _resolve(ns):
    """Replace the expression-valued model flags of ``ns`` by floats."""
    env = {}
    for key in RESOLVE_ORDER:
        raw = getattr(ns, key, None)
        if raw is None:
            continue
        env[key] = evaluate_expression(raw, env)
        setattr(ns, key, float(env[key]))
    return env


def _num(ns, env, name):
    raw = getattr(ns, name)
    if raw is None:
        return None
    return float(evaluate_expression(raw, env))


def _nums(env, values):
    return [float(evaluate_expression(v, env)) for v in values]


# Output.

def _out_path(path):
    p = Path(path)
    base = os.environ.get(OUTDIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(text, out):
    if not text.endswith("\n"):
        text += "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    p = _out_path(out)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _dumps(obj):
    return json.dumps(obj, default=_json_default)


def _family(ns):
    if ns.family == "two-point":
        return None
    return SemiexpFamily.weibull(ns.family, ns.eps, ns.q)


# Commands.

def cmd_rate(ns):
    env = _resolve(ns)
    params = rates.RateParams.of(ns.eps, ns.q, ns.sigma2, ns.c)
    rows = rates.emit_curve(ns.id, params, _num(ns, env, "ymin"), _num(ns, env, "ymax"), ns.points)
    if ns.format == "csv":
        _emit(rates.curve_to_csv(rows), ns.out)
    else:
        _emit("\n".join(_dumps(r.__dict__) for r in rows), ns.out)
    return EXIT_OK


def cmd_phase(ns):
    env = _resolve(ns)
    model = ModelParams(ns.eps, ns.q, ns.sigma2)
    c = ns.c if ns.c is not None else 1.0
    y = _num(ns, env, "y")
    if ns.grid:
        a_lo, a_hi = _nums(env, ns.alpha_range)
        b_lo, b_hi = _nums(env, ns.beta_range)
        rows, lines = phase.diagram_grid(model, c, (a_lo, a_hi), (b_lo, b_hi), ns.resolution, y)
        _emit(phase.grid_to_csv(rows), ns.out)
        if ns.polylines:
            _emit(phase.polylines_to_json(lines), ns.polylines)
        return EXIT_OK
    if ns.alpha is None:
        raise UsageError("phase: --alpha is required without --grid")
    beta = ns.beta if ns.beta is not None else math.inf
    info = phase.classify(_num(ns, env, "alpha"), beta, model, c, y)
    if ns.format == "json":
        _emit(_dumps(info.__dict__), ns.out)
    else:
        _emit(info.describe(), ns.out)
    return EXIT_OK


def _check_budget(samples):
    if samples < 1000:
        raise ParameterError(f"--samples must be at least 1000, got {samples}")


def cmd_estimate(ns):
    from . import mc

    env = _resolve(ns)
    _check_budget(ns.samples)
    ns_list = [int(n) for n in ns.n]
    if any(b <= a for a, b in zip(ns_list, ns_list[1:])) or min(ns_list) < 1:
        raise ParameterError("--n must be an increasing list of positive integers")
    if ns.c is None:
        ns.c = 1.0
    lines = []
    results = []
    if ns.family == "two-point" or ns.h is not None:
        thresholds_ = _nums(env, ns.threshold or [])
        if not thresholds_:
            raise ParameterError("lattice runs need --threshold")
        for n in ns_list:
            if ns.family == "two-point":
                dist = LatticeDist.two_point()
            else:
                if ns.beta is None:
                    raise ParameterError("--h needs a truncation (--beta, --c)")
                dist = mc.discretize(_family(ns), TruncationParams(ns.beta, ns.c), n, _num(ns, env, "h"))
            for t in thresholds_:
                exact = mc.exact_result(dist, n, t)
                est = mc.tilted_is_estimate(dist, n, t, ns.samples, ns.seed, n_jobs=ns.jobs)
                lines += [exact.to_json(), est.to_json()]
                within = abs(est.log_prob - exact.log_prob) <= 3 * est.std_err if math.isfinite(exact.log_prob) else None
                lines.append(_dumps({"summary": "oracle_check", "n": n, "threshold": t, "within_3_std_err": within}))
        _emit("\n".join(lines), ns.out)
        return EXIT_OK

    family = _family(ns)
    trunc = None if ns.beta is None else TruncationParams(ns.beta, ns.c)
    alpha = _num(ns, env, "alpha")
    if alpha is None:
        raise UsageError("estimate: --alpha is required for family runs")
    ys = _nums(env, ns.y)
    info = None
    if ns.regime is not None:
        info = phase.classify(alpha, trunc.beta if trunc else math.inf, family.params, trunc.c if trunc else 1.0)
        if info.regime != ns.regime:
            raise ParameterError(f"(alpha, beta) lies in the {info.regime} regime, not {ns.regime}")
    estimator = ns.estimator or ("naive" if ns.regime in (None, "gaussian", "transition3") else "big_jump_split")
    run = {"naive": mc.naive_estimate, "big_jump_split": mc.big_jump_split_estimate}.get(estimator)
    if run is None:
        raise ParameterError(f"estimator {estimator!r} needs a lattice (--family two-point or --h)")
    for y in ys:
        per_y = []
        for n in ns_list:
            r = run(family, trunc, n, alpha, y, ns.samples, ns.seed, n_jobs=ns.jobs)
            per_y.append(r)
            lines.append(r.to_json())
        results.append(per_y)
    if info is not None and info.speed_exponent is not None and len(ns_list) >= 3:
        for y, per_y in zip(ys, results):
            fit = mc.slope_fit(per_y, info.speed_exponent)
            lines.append(_dumps({
                "summary": "slope_fit", "y": y, "regime": info.regime, "speed_exponent": info.speed_exponent,
                "limit": fit.limit, "reliable": fit.reliable, "reason": fit.reason,
                "ratios": [{"n": row[0], "ratio": row[3], "ratio_std_err": row[4]} for row in fit.table],
            }))
    _emit("\n".join(lines), ns.out)
    return EXIT_OK


def cmd_verify(ns):
    from . import verify

    env = _resolve(ns)
    report = verify.run_suite(ns.suite, seed=ns.seed, n=ns.n, family=ns.family, env=env)
    _emit(_dumps(report), ns.out)
    if not report["passed"]:
        failing = [c["name"] for c in report["checks"] if not c["passed"]]
        print(f"verification failed: {', '.join(failing)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# Parser.

def _model_flags(p, sigma2=True):
    p.add_argument("--eps", "--epsilon", dest="eps", default="1/2", help="epsilon in (0, 1)")
    p.add_argument("--q", default="1", help="tail constant q")
    if sigma2:
        p.add_argument("--sigma2", default="1", help="variance entering the rate functions")
    p.add_argument("--c", default=None, help="truncation constant c")


def build_parser():
    top = _Parser(prog="semiexp-ldp", description="Large deviations for sums of semiexponential variables.")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", help="tabulate a rate function")
    p.add_argument("--id", required=True, help=f"one of {', '.join(rates.RATE_IDS)}")
    _model_flags(p)
    p.add_argument("--ymin", default="0")
    p.add_argument("--ymax", required=True)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("phase", help="classify (alpha, beta) or emit the regime diagram")
    _model_flags(p)
    p.add_argument("--alpha", default=None)
    p.add_argument("--beta", default=None, help="cap exponent; omit for the uncapped model")
    p.add_argument("--y", default=None, help="resolves the alpha = beta + 1 boundary")
    p.add_argument("--grid", action="store_true")
    p.add_argument("--alpha-range", nargs=2, default=["0.5 + 1/100", "2"])
    p.add_argument("--beta-range", nargs=2, default=["1/100", "3/2"])
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--polylines", default=None, help="write boundary polylines as JSON here")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("estimate", help="Monte Carlo estimates as JSON lines")
    p.add_argument("--family", choices=("symmetric", "one_sided_centered", "two-point"), default="symmetric")
    _model_flags(p, sigma2=False)
    p.add_argument("--beta", default=None)
    p.add_argument("--alpha", default=None)
    p.add_argument("--y", nargs="+", default=["1"])
    p.add_argument("--n", nargs="+", type=int, required=True)
    p.add_argument("--regime", choices=phase.REGIMES, default=None)
    p.add_argument("--estimator", choices=("naive", "big_jump_split", "tilted_is"), default=None)
    p.add_argument("--threshold", nargs="+", default=None, help="lattice runs: thresholds for the n-sum")
    p.add_argument("--h", default=None, help="discretize the capped family with this step")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=("rates", "mc", "audit", "all"))
    p.add_argument("--n", type=int, default=32, help="sum length for the mc suite")
    p.add_argument("--family", choices=("symmetric", "one_sided_centered"), default="symmetric")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)
    return top


def main(argv=None):
    try:
        ns = build_parser().parse_args(argv)
        return ns.func(ns)
    except UsageError as exc:
        print(str(exc).splitlines()[0], file=sys.stderr)
    except (ParameterError, DomainError, NumericError, ResourceError, ValueError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
