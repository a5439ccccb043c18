"""Refined profiles, Fermi Golden Rule coefficients and mode selection for small NLS solutions in 1D."""

from .indices import (FrequencyVector, IndexTables, ResonanceDegeneracyError, classify, enumerate_A,
                      enumerate_tables, monomial_eval, monomial_product_exponent, pair_bound)
from .spectral import Grid, GridOperator, WeightedNorm, build_operator, gaussian_wells, sech2, weighted_norm
from .profile import (LeadingCoefficients, NonlinearitySpec, ProfileCoefficients, build_leading, eval_profile,
                      forced_residual, solve_profile, truncation_order)
from .fgr import FgrCoefficient, check_fgr_assumption, compute_gamma, genericity_quadratic
from .dynamics import IntegratorConfig, ProfileCache, energy, modulate, run_selection, fgr_dissipation_diagnostic

__version__ = "0.1.0"
