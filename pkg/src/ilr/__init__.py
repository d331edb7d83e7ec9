"""Improper online multiclass logistic regression and its applications."""

from .aggregating import AggregatingRegressor, FiniteAggregator, run_online, theoretical_regret_bound
from .bandit import OBAMA, obama_mu_settings
from .baselines import OnlineGradientDescent, OnlineNewtonStep
from .boosting import AdaBoostOLMpp, cost_matrix
from .batch import boost_confidence, ewoo_simplex, online_to_batch
from .sampler import PosteriorSpec, SamplerConfig, draw_samples
from .weights import WeightSet

__all__ = [
    "AggregatingRegressor", "FiniteAggregator", "run_online", "theoretical_regret_bound",
    "OBAMA", "obama_mu_settings", "OnlineGradientDescent", "OnlineNewtonStep",
    "AdaBoostOLMpp", "cost_matrix", "boost_confidence", "ewoo_simplex", "online_to_batch",
    "PosteriorSpec", "SamplerConfig", "draw_samples", "WeightSet",
]
__version__ = "0.1.0"
