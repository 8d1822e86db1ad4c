"""Preferential Bayesian optimization: learn a latent utility from pairwise
comparisons with a GP + probit model and pick duels via an exact, analytic
knowledge gradient.
"""

import threadpoolctl as _threadpoolctl

# The linear algebra here is dominated by many small factorizations; BLAS
# thread fan-out loses badly on them. Parallelism belongs at the seed level.
_threadpoolctl.threadpool_limits(1, "blas")

from .acquisitions import (
    AcqOptions,
    DuelQuery,
    DuelStats,
    OUTCOME_FIRST,
    OUTCOME_SECOND,
    argmax_posterior_mean,
    duel_probability,
    eubo,
    kg_oneshot,
    lookahead_mean,
    next_duel,
    qlogei,
)
from .benchmarks import OracleConfig, TestFunction, calibrate_sigma, eval_fn, get_function, oracle_compare
from .experiment import ExperimentConfig, RunRecord, run_experiment, summarize
from .gp import GammaPrior, KernelHypers, hyperprior_logpdf, kernel_matrix, matern52
from .laplace import LaplacePosterior, PrefDataset, fit_hypers, fit_map, laplace_evidence, loglik_terms
from .skewnormal import BivariateGaussian, EsnParams, condition_on_nonneg, esn_cgf, esn_mean, esn_pdf
from .stats import BoxDomain, RandomSource, chol_psd, integrate_1d, normal_funcs, sobol_sample

__version__ = "0.1.0"

__all__ = [
    "AcqOptions",
    "BivariateGaussian",
    "BoxDomain",
    "DuelQuery",
    "DuelStats",
    "EsnParams",
    "ExperimentConfig",
    "GammaPrior",
    "KernelHypers",
    "LaplacePosterior",
    "OracleConfig",
    "OUTCOME_FIRST",
    "OUTCOME_SECOND",
    "PrefDataset",
    "RandomSource",
    "RunRecord",
    "TestFunction",
    "argmax_posterior_mean",
    "calibrate_sigma",
    "chol_psd",
    "condition_on_nonneg",
    "duel_probability",
    "esn_cgf",
    "esn_mean",
    "esn_pdf",
    "eubo",
    "eval_fn",
    "fit_hypers",
    "fit_map",
    "get_function",
    "hyperprior_logpdf",
    "integrate_1d",
    "kernel_matrix",
    "kg_oneshot",
    "laplace_evidence",
    "loglik_terms",
    "lookahead_mean",
    "matern52",
    "next_duel",
    "normal_funcs",
    "oracle_compare",
    "qlogei",
    "run_experiment",
    "sobol_sample",
    "summarize",
]
