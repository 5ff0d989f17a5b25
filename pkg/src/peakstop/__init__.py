"""peakstop: exact solvers and Monte Carlo batteries for the problem of
stopping a walk or Levy process as close as possible to its running maximum."""

from .errors import PreconditionError, ResourceLimitError
from .lattice import (
    LatticeStepDistribution,
    PredictionProblem,
    SkewClass,
    brute_force_value,
    classify_skew,
    dual_distribution,
    snell_solve,
    verify_bang_bang,
)
from .levy import LevyMeasure, LevyTriplet, SimScheme, classify, simulate_paths
from .rewards import Exponential, Indicator0, Linear, NegPower, PiecewiseLinear

__all__ = [
    "Exponential",
    "Indicator0",
    "LatticeStepDistribution",
    "LevyMeasure",
    "LevyTriplet",
    "Linear",
    "NegPower",
    "PiecewiseLinear",
    "PreconditionError",
    "PredictionProblem",
    "ResourceLimitError",
    "SimScheme",
    "SkewClass",
    "brute_force_value",
    "classify",
    "classify_skew",
    "dual_distribution",
    "simulate_paths",
    "snell_solve",
    "verify_bang_bang",
]

__version__ = "0.1.0"
