"""Digit concatenations of additive functions: construction, block statistics and exponential-sum probes."""

__version__ = "0.1.0"

from .additive import (BUILTINS, OMEGA, OMEGA_BIG, AdditiveFunctionSpec, FactoredRange, PrimeMoments, evaluate,
                       load_spec, prime_moments, sieve_range)
from .blocks import Block, BlockCensus, CountReport, census, chi_square, count_formula, merge, theta_ind
from .classify import acp_diagnostic, b_eps, bias_demo, classify, ek_stats, weak_diagnostic
from .digits import LengthSchedule, build_stream, build_window_stream, digit_of, k_y, truncate
from .expsum import complex_gamma, decay_profile, exp_sum, phase_prediction, sd_main_term

__all__ = [
    "BUILTINS", "OMEGA", "OMEGA_BIG", "AdditiveFunctionSpec", "FactoredRange", "PrimeMoments", "evaluate",
    "load_spec", "prime_moments", "sieve_range", "Block", "BlockCensus", "CountReport", "census", "chi_square",
    "count_formula", "merge", "theta_ind", "acp_diagnostic", "b_eps", "bias_demo", "classify", "ek_stats",
    "weak_diagnostic", "LengthSchedule", "build_stream", "build_window_stream", "digit_of", "k_y", "truncate",
    "complex_gamma", "decay_profile", "exp_sum", "phase_prediction", "sd_main_term",
]
