"""Constrained preferential Bayesian optimization.

Pairwise human (or simulated) preferences drive a latent-utility GP while a
directly observable constraint is modeled by a regression GP; candidate pairs
are chosen by maximizing the expected utility of the best option weighted by
the probability that both candidates are feasible.
"""

from cpbo.kernels import KernelSpec, kernel_eval
from cpbo.gp import GPModel, PredictiveDistribution, fit_gp, gp_posterior
from cpbo.prefgp import (
    Comparison,
    PreferenceDataset,
    LatentPosterior,
    PreferenceModel,
    tm_log_likelihood,
    laplace_fit,
    pref_posterior,
)
from cpbo.acquisition import (
    AcqConfig,
    PairStats,
    pair_stats,
    eubo,
    feasibility_prob,
    euboc,
    maximize_pair,
)
from cpbo.engine import Engine, Policy, auto_win_rule

__all__ = [
    "KernelSpec",
    "kernel_eval",
    "GPModel",
    "PredictiveDistribution",
    "fit_gp",
    "gp_posterior",
    "Comparison",
    "PreferenceDataset",
    "LatentPosterior",
    "PreferenceModel",
    "tm_log_likelihood",
    "laplace_fit",
    "pref_posterior",
    "AcqConfig",
    "PairStats",
    "pair_stats",
    "eubo",
    "feasibility_prob",
    "euboc",
    "maximize_pair",
    "Engine",
    "Policy",
    "auto_win_rule",
]
