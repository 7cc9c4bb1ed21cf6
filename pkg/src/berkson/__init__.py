"""Threshold learning under Berkson (uniform) feature noise.

Regression functions with a margin condition, their convolution with the
noise, a seeded label oracle, the WIDEHIST and ACTPASS estimators, the
two-hypothesis lower-bound calculations and a Monte-Carlo rate harness.
"""

from .convolution import ConvolvedFunction, convolve, local_slope, max_gap
from .errors import BerksonError
from .estimators import WidehistConfig, actpass, containment_frequency, majority_bisection, widehist
from .function_class import MarginParams, RegressionFunction, check_membership, make_lb_pair, make_power
from .harness import Constant, ExperimentConfig, PowerLaw, fit_rate, run_cell, run_sweep, theoretical_exponent
from .lowerbound import kl_bernoulli, kl_report, make_pair, rate_from_kl, verify_gap_scaling
from .oracle import NoisyOracle

__version__ = "0.1.0"

__all__ = [
    "BerksonError",
    "Constant",
    "ConvolvedFunction",
    "ExperimentConfig",
    "MarginParams",
    "NoisyOracle",
    "PowerLaw",
    "RegressionFunction",
    "WidehistConfig",
    "actpass",
    "check_membership",
    "containment_frequency",
    "convolve",
    "fit_rate",
    "kl_bernoulli",
    "kl_report",
    "local_slope",
    "majority_bisection",
    "make_lb_pair",
    "make_pair",
    "make_power",
    "max_gap",
    "rate_from_kl",
    "run_cell",
    "run_sweep",
    "theoretical_exponent",
    "verify_gap_scaling",
    "widehist",
]
