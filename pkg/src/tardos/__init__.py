"""Symmetric Tardos traitor tracing: parameters, codebooks, attacks, accusation."""

from .attacks import ALL_STRATEGIES, Forgery, Strategy, forge, verify_marking
from .codec import Codebook, gen_codebook, generate_codebook, read_codebook, sample_bias, write_codebook
from .montecarlo import (
    ErrorEstimate, TrialConfig, appendix_b_oracle, coalition_moment_oracle, innocent_moment_oracle,
    run_campaign, run_completeness_trials, run_soundness_trials, wilson_interval,
)
from .numerics import bisect, expect_under_f, h_fn, h_inv_fn
from .params import (
    ConstraintSlack, ParamSet, SchemeContext, SchemeParams, Variant, asymptotic_params,
    candidate_from, check_constraints, derive_scheme_params, eta_from, integral_adjust,
    optimize, optimize_generic, sweep,
)
from .scoring import AccusationReport, accuse, coalition_score, score_all, symbol_score

__version__ = "0.1.0"
