"""Improper online multiclass logistic regression by exponential weights.

:class:`AggregatingRegressor` keeps a posterior over a weight set and predicts
the smoothed mixture of the softmax outputs, mapped back to logits::

    z_t = log(smooth_mu(E_{W ~ P_t}[softmax(W x_t)]))

The expectation is computed either by Langevin sampling or exactly over a
finite grid.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import losses
from .sampler import PosteriorSpec, SamplerConfig, draw_samples


def as_label_weights(y, K):
    """Accept a class index or a weight vector; return a float vector."""
    if np.ndim(y) == 0:
        k = int(y)
        if not 0 <= k < K:
            raise ValueError(f"class index {k} out of range for K={K}")
        out = np.zeros(K)
        out[k] = 1.0
        return out
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (K,):
        raise ValueError(f"label weights must have length {K}")
    if np.any(y < 0):
        raise ValueError("label weights must be nonnegative")
    return y


def theoretical_regret_bound(D, L, B, R, n, mu=0.0, y_l1_total=None):
    """Regret bound ``5 L D log(B R n / D + e) + 2 mu sum_t ||y_t||_1``.

    ``y_l1_total`` defaults to ``n`` (one-hot outcomes).
    """
    if y_l1_total is None:
        y_l1_total = n
    return 5.0 * L * D * math.log(B * R * n / D + math.e) + 2.0 * mu * y_l1_total


class AggregatingRegressor:
    """Online learner predicting improper logits from a posterior over ``W``.

    Parameters
    ----------
    weight_set : WeightSet
        The comparator class; the prior is uniform over it.
    mu : float, optional
        Smoothing parameter in [0, 1/2]. Defaults to ``1/n``.
    n : int, optional
        Horizon, only used for the default ``mu``.
    L : float
        Mixability scale; every outcome must satisfy ``||y||_1 <= L``.
    sampler : SamplerConfig
        ``method="grid"`` keeps exact exponential weights over a grid,
        ``"langevin"`` draws ``m`` fresh samples every round.
    R : float, optional
        If given, inputs with dual norm above ``R`` are rejected.
    """

    def __init__(self, weight_set, mu=None, n=None, L=1.0, sampler=None, R=None):
        if mu is None:
            if n is None:
                raise ValueError("give either mu or the horizon n")
            mu = 1.0 / n
        if not 0.0 <= mu <= 0.5:
            raise ValueError(f"smoothing parameter must lie in [0, 1/2], got {mu}")
        self.sampler = sampler or SamplerConfig()
        if mu == 0 and self.sampler.method != "grid":
            raise ValueError("mu = 0 is only supported with the exact grid")
        if not L > 0:
            raise ValueError("L must be positive")
        self.weight_set = weight_set
        self.mu = float(mu)
        self.L = float(L)
        self.R = R
        self.t = 1
        self.max_abs_logit = 0.0
        self._X, self._Y = [], []
        if self.sampler.method == "grid":
            ws = weight_set
            if ws.dim > self.sampler.max_grid_dims:
                raise ValueError(f"grid mode supports at most {self.sampler.max_grid_dims} "
                                 f"free dimensions, set has {ws.dim}")
            self.grid = ws.grid(self.sampler.grid_points)
            self.log_weights = np.zeros(len(self.grid))

    @property
    def K(self):
        return self.weight_set.K

    @property
    def spec(self):
        """The current posterior as an immutable :class:`PosteriorSpec`."""
        ws = self.weight_set
        X = np.array(self._X).reshape(-1, ws.d)
        Y = np.array(self._Y).reshape(-1, ws.K)
        return PosteriorSpec(ws, self.L, X, Y)

    def _check_x(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape != (self.weight_set.d,):
            raise ValueError(f"expected an input of dimension {self.weight_set.d}")
        if self.R is not None:
            dual = np.abs(x).sum() if self.weight_set.norm == "linf" else np.linalg.norm(x)
            if dual > self.R * (1 + 1e-12):
                raise ValueError(f"input norm {dual} exceeds R = {self.R}")
        return x

    def posterior_probs(self, x):
        """Unsmoothed ``E_{W ~ P_t}[softmax(W x)]``."""
        x = self._check_x(x)
        if self.sampler.method == "grid":
            z = self.weight_set.logits(self.grid, x)
            return losses.mix_probabilities(self.log_weights, losses.softmax(z))
        seed = np.random.SeedSequence([self.sampler.seed, self.t])
        return draw_samples(self.spec, self.sampler, seed=seed).mean_probs(x)

    def predict(self, x):
        p = losses.smooth(self.posterior_probs(x), self.mu)
        z = np.log(np.maximum(p, losses.PROB_FLOOR))
        self.max_abs_logit = max(self.max_abs_logit, float(np.max(np.abs(z))))
        return z

    def update(self, x, y):
        x = self._check_x(x)
        y = as_label_weights(y, self.K)
        if y.sum() > self.L * (1 + 1e-12):
            raise ValueError(f"||y||_1 = {y.sum()} exceeds L = {self.L}")
        if self.sampler.method == "grid":
            z = self.weight_set.logits(self.grid, x)
            self.log_weights -= losses.weighted_logistic_loss(z, y) / self.L
            self.log_weights -= self.log_weights.max()
        self._X.append(x)
        self._Y.append(y)
        self.t += 1
        return self


class FiniteAggregator:
    """Aggregating strategy over a finite set of experts.

    Each round the caller supplies the experts' logits (an ``(N, K)`` array,
    possibly depending on past outcomes). Weights are exponential in the
    experts' cumulative losses at rate ``1/L`` and the prediction is the
    smoothed mixed prediction.
    """

    def __init__(self, n_experts, mu=None, n=None, L=1.0):
        if n_experts < 1:
            raise ValueError("need at least one expert")
        if mu is None:
            if n is None:
                raise ValueError("give either mu or the horizon n")
            mu = 1.0 / n
        self.mu, self.L = float(mu), float(L)
        self.log_weights = np.zeros(n_experts)

    @property
    def weights(self):
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def predict(self, expert_logits):
        expert_logits = np.atleast_2d(expert_logits)
        if len(expert_logits) != len(self.log_weights):
            raise ValueError("one row of logits per expert is required")
        p = np.exp(losses.mix_prediction(expert_logits, self.weights))
        return np.log(np.maximum(losses.smooth(p, self.mu), losses.PROB_FLOOR))

    def update(self, expert_logits, y):
        expert_logits = np.atleast_2d(expert_logits)
        y = as_label_weights(y, expert_logits.shape[1])
        self.log_weights -= losses.weighted_logistic_loss(expert_logits, y) / self.L
        self.log_weights -= self.log_weights.max()
        return self


@dataclass
class RegretRecord:
    """Per-round loss ledger for a learner and a set of tracked comparators.

    ``comparator_losses`` has one column per comparator; the regret is taken
    against the comparator with the smallest total.
    """

    learner_losses: np.ndarray
    comparator_losses: np.ndarray
    bound: float = float("nan")
    max_abs_logit: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.learner_losses)

    @property
    def learner_total(self):
        return float(np.sum(self.learner_losses))

    @property
    def best_comparator(self):
        return int(np.argmin(self.comparator_losses.sum(axis=0)))

    @property
    def comparator_total(self):
        return float(self.comparator_losses[:, self.best_comparator].sum())

    @property
    def regret(self):
        return self.learner_total - self.comparator_total

    def cumulative_regret(self):
        """Regret after each prefix, against the best comparator of that prefix."""
        learner = np.cumsum(self.learner_losses)
        best = np.min(np.cumsum(self.comparator_losses, axis=0), axis=1)
        return learner - best


def comparator_losses(weight_set, params, X, Y):
    """Loss of every fixed parameter vector on every example, shape ``(n, C)``."""
    base, phi = weight_set.features(X)
    Z = base[:, None, :] + np.einsum("cp,npk->nck", np.atleast_2d(params), phi)
    return losses.weighted_logistic_loss(Z, np.asarray(Y, dtype=np.float64)[:, None, :])


def run_online(learner, X, labels, comparator_params=None, weight_set=None):
    """Play a stream against ``learner`` and return a :class:`RegretRecord`.

    ``labels`` are class indices or label-weight rows. Comparators default to
    the learner's own grid when it has one.
    """
    K = learner.K
    X = np.asarray(X, dtype=np.float64)
    Y = np.array([as_label_weights(y, K) for y in labels])
    out = np.empty(len(X))
    for t, (x, y) in enumerate(zip(X, Y)):
        z = learner.predict(x)
        out[t] = losses.weighted_logistic_loss(z, y)
        learner.update(x, y)
    ws = weight_set or learner.weight_set
    if comparator_params is None:
        comparator_params = learner.grid
    comp = comparator_losses(ws, comparator_params, X, Y)
    return RegretRecord(out, comp, max_abs_logit=getattr(learner, "max_abs_logit", 0.0))
