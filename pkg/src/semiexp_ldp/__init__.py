"""Large deviations for sums of semiexponential random variables.

Closed-form rate functions with brute-force oracles (:mod:`.rates`), the
regime diagram of the capped model (:mod:`.phase`), the distribution
families (:mod:`.model`) and rare-event Monte Carlo (:mod:`.mc`).
"""

from ._validation import (
    DegenerateTruncationError,
    DomainError,
    NumericError,
    ParameterError,
    ResourceError,
)
from .model import ModelParams, SemiexpFamily, TruncationParams
from .phase import RegimeInfo, classify
from .rates import RateParams, emit_curve, evaluate

__version__ = "0.1.0"

__all__ = [
    "DegenerateTruncationError",
    "DomainError",
    "ModelParams",
    "NumericError",
    "ParameterError",
    "RateParams",
    "RegimeInfo",
    "ResourceError",
    "SemiexpFamily",
    "TruncationParams",
    "classify",
    "emit_curve",
    "evaluate",
]
