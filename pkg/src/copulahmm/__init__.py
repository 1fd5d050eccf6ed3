"""Hidden Markov models with copula-linked Conway-Maxwell-Poisson emissions.

Each hidden state emits a pair of counts whose CMP marginals are joined by a
Frank, Clayton, or Ali-Mikhail-Haq copula. Transition probabilities may depend
on covariates through a multinomial logit link.
"""
from .cmp import CmpParams, cdf, cdf_table, log_normalizing_constant, mean, pmf, pmf_table
from .copula import CopulaSpec, Family, bivariate_pmf, copula_cdf, pmf_grid
from .data import Dataset, DataError, load_dataset, write_dataset
from .decode import DecodedSequence, covariate_profile, stationary_distribution, viterbi
from .errors import FitError, NumericalFailure, StartRejected
from .estimation import (
    FitResult,
    OptimizerSettings,
    StartRanges,
    covariance_estimate,
    fit,
    multi_start_fit,
    order_states,
    transition_curve_ci,
)
from .likelihood import MatchSeries, SeriesBatch, information_criteria, log_forward, log_likelihood
from .model import (
    ModelParams,
    ModelSpec,
    intercepts_from_tpm,
    num_params,
    pack,
    transition_matrix,
    unpack,
)
from .persist import load_model, save_model
from .simulate import FootballCovariates, simulate_match, simulate_matches

__all__ = [
    "CmpParams", "cdf", "cdf_table", "log_normalizing_constant", "mean", "pmf", "pmf_table",
    "CopulaSpec", "Family", "bivariate_pmf", "copula_cdf", "pmf_grid",
    "Dataset", "DataError", "load_dataset", "write_dataset",
    "DecodedSequence", "covariate_profile", "stationary_distribution", "viterbi",
    "FitError", "NumericalFailure", "StartRejected",
    "FitResult", "OptimizerSettings", "StartRanges", "covariance_estimate", "fit",
    "multi_start_fit", "order_states", "transition_curve_ci",
    "MatchSeries", "SeriesBatch", "information_criteria", "log_forward", "log_likelihood",
    "ModelParams", "ModelSpec", "intercepts_from_tpm", "num_params", "pack",
    "transition_matrix", "unpack",
    "load_model", "save_model",
    "FootballCovariates", "simulate_match", "simulate_matches",
]
