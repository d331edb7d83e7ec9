"""Bandit multiclass classification with importance-weighted logistic feedback.

Each round the learner samples a label from the softmax of an inner
:class:`~ilr.aggregating.AggregatingRegressor`, observes only whether it was
right, and feeds the inner learner the importance-weighted outcome::

    y_tilde(k) = 1[k = y_hat] * 1[y_hat = y] / p(y_hat)

The inner learner runs at mixability scale
``L = K / ((1 - mu) exp(-2 B R) + mu)``, which bounds ``||y_tilde||_1``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import losses
from .aggregating import AggregatingRegressor


def obama_L(K, B, R, mu):
    return K / ((1.0 - mu) * math.exp(-2.0 * B * R) + mu)


def probability_floor(K, B, R, mu):
    """Lower bound ``((1 - mu) exp(-2 B R) + mu) / K`` on every predicted probability."""
    return ((1.0 - mu) * math.exp(-2.0 * B * R) + mu) / K


def mistake_bound(d, K, B, R, n, mu):
    """Expected-mistake overhead ``5 L(mu) d K log(B R n / (d K) + e) + 2 mu n``."""
    return 5.0 * obama_L(K, B, R, mu) * d * K * math.log(B * R * n / (d * K) + math.e) \
        + 2.0 * mu * n


@dataclass(frozen=True)
class MuSettings:
    mu_exp: float
    mu_sqrt: float
    bound_exp: float
    bound_sqrt: float

    @property
    def mu(self):
        """The setting with the smaller bound."""
        return self.mu_exp if self.bound_exp <= self.bound_sqrt else self.mu_sqrt

    @property
    def bound(self):
        return min(self.bound_exp, self.bound_sqrt)


def obama_mu_settings(d, K, B, R, n):
    """The two candidate smoothing levels and their mistake-bound overheads.

    ``mu_exp = 0`` gives ``5 d K^2 e^{2BR} log(...)``; ``mu_sqrt =
    sqrt(d K^2 log(B R n / (d K) + e) / n)`` trades the exponential factor
    for a ``sqrt(n)`` term. ``mu_sqrt`` is capped at 1/2.
    """
    if min(d, K, n) <= 0 or B < 0 or R <= 0:
        raise ValueError("need positive d, K, R, n and nonnegative B")
    log_term = math.log(B * R * n / (d * K) + math.e)
    mu_sqrt = min(0.5, math.sqrt(d * K * K * log_term / n))
    return MuSettings(0.0, mu_sqrt,
                      mistake_bound(d, K, B, R, n, 0.0),
                      mistake_bound(d, K, B, R, n, mu_sqrt))


def importance_weighted_label(p, y_hat, correct):
    """Feedback vector given the sampled label and the correctness bit."""
    out = np.zeros(len(p))
    if correct:
        out[y_hat] = 1.0 / p[y_hat]
    return out


def expected_feedback(p, y):
    """``sum_k p(k) * y_tilde(k-th outcome)``, which equals ``e_y``."""
    return sum(p[k] * importance_weighted_label(p, k, k == y) for k in range(len(p)))


@dataclass
class BanditRound:
    y_hat: int
    mistake: bool
    y_tilde: np.ndarray
    p: np.ndarray
    resmoothed: bool = False


class OBAMA:
    """Bandit learner over ``weight_set`` for a horizon of ``n`` rounds.

    ``mu`` defaults to the setting from :func:`obama_mu_settings` with the
    smaller bound. Sampling of ``y_hat`` uses its own generator seeded by
    ``seed``, separate from the inner sampler.
    """

    def __init__(self, weight_set, n, R=1.0, mu=None, sampler=None, seed=0):
        ws = weight_set
        self.weight_set = ws
        self.R = float(R)
        self.settings = obama_mu_settings(ws.d, ws.K, ws.B, R, n)
        self.mu = self.settings.mu if mu is None else float(mu)
        self.L = obama_L(ws.K, ws.B, R, self.mu)
        self.floor = probability_floor(ws.K, ws.B, R, self.mu)
        self.inner = AggregatingRegressor(ws, mu=self.mu, L=self.L, sampler=sampler, R=R)
        self.rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
        self.resmoothings = 0

    @property
    def K(self):
        return self.weight_set.K

    def _distribution(self, x):
        p = losses.softmax(self.inner.predict(x))
        pmin = float(p.min())
        if pmin >= self.floor * (1.0 - 1e-12):
            return p, False
        # Monte Carlo error pushed a class below the floor: mix in just enough uniform
        lam = (self.floor - pmin) / (1.0 / self.K - pmin)
        self.resmoothings += 1
        return (1.0 - lam) * p + lam / self.K, True

    def round(self, x, y):
        """Play one round against the true label ``y``; only ``y_hat == y`` is used."""
        y = int(y)
        if not 0 <= y < self.K:
            raise ValueError(f"label {y} out of range for K={self.K}")
        p, resmoothed = self._distribution(x)
        y_hat = int(self.rng.choice(self.K, p=p))
        correct = y_hat == y
        y_tilde = importance_weighted_label(p, y_hat, correct)
        self.inner.update(x, y_tilde)
        return BanditRound(y_hat, not correct, y_tilde, p, resmoothed)


def bandit_round(state, x, y):
    """Functional alias for :meth:`OBAMA.round`."""
    return state.round(x, y)
