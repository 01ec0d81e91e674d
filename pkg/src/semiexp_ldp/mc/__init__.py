"""Rare-event estimation for sums of semiexponential variables."""

from .._lattice import LatticeDist
from .estimators import big_jump_split_estimate, exact_result, jump_theta, naive_estimate, tilted_is_estimate
from .extrapolation import SlopeFit, slope_fit
from .lattice import cgf_and_tilt, discretize, exact_tail_convolution, log_mgf
from .results import ESTIMATORS, EstimateResult

__all__ = [
    "ESTIMATORS",
    "EstimateResult",
    "LatticeDist",
    "SlopeFit",
    "big_jump_split_estimate",
    "cgf_and_tilt",
    "discretize",
    "exact_result",
    "exact_tail_convolution",
    "jump_theta",
    "log_mgf",
    "naive_estimate",
    "slope_fit",
    "tilted_is_estimate",
]
