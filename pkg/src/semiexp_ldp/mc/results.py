from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

ESTIMATORS = ("naive", "tilted_is", "big_jump_split", "exact_lattice")


@dataclass(frozen=True)
class EstimateResult:
    """One estimate of ``log P(T_n >= threshold)``.

    ``y`` is the scaled level (the threshold is ``n**alpha * y``) for the
    continuous-family estimators and the raw threshold for the lattice ones.
    ``std_err`` is the delta-method standard error of ``log_prob``;
    ``meta`` carries estimator-specific diagnostics.
    """

    n: int
    y: float
    log_prob: float
    std_err: float
    samples: int
    estimator: str
    seed: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def degenerate(self):
        return math.isinf(self.log_prob) or math.isinf(self.std_err)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=False)

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        return cls(
            n=int(d["n"]), y=float(d["y"]), log_prob=float(d["log_prob"]),
            std_err=float(d["std_err"]), samples=int(d["samples"]),
            estimator=d["estimator"], seed=int(d["seed"]), meta=d.get("meta", {}),
        )
