"""Online-to-batch conversion with a high-probability excess-risk guarantee.

:func:`boost_confidence` trains ``M = ceil(log(2/delta))`` online learners on
disjoint chunks, freezes each at a random stopping time, smooths them, and
aggregates the smoothed predictors with EWOO on held-out data. The final
predictor is a convex mixture of the smoothed frozen predictors.
"""

import copy
import math
from dataclasses import dataclass

import numpy as np

from . import losses
from .aggregating import as_label_weights


class FrozenPredictor:
    """An online learner's state frozen at a stopping time, mapping ``x`` to probabilities."""

    def __init__(self, learner, tau):
        self.learner = learner
        self.tau = int(tau)

    def predict_proba(self, x):
        return losses.softmax(self.learner.predict(x))


def online_to_batch(X, Y, learner_factory, seed=0):
    """Freeze a fresh learner after ``tau - 1`` updates, ``tau`` uniform on the chunk.

    ``learner_factory()`` must return a learner with ``K``, ``predict(x)``
    (logits) and ``update(x, y)``. Rounds after ``tau - 1`` do not affect the
    frozen state and are skipped.
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("online-to-batch needs a nonempty chunk")
    if len(X) != len(Y):
        raise ValueError("inputs and labels differ in length")
    rng = np.random.default_rng(seed)
    tau = int(rng.integers(1, len(X) + 1))
    learner = learner_factory()
    for x, y in zip(X[: tau - 1], Y[: tau - 1]):
        learner.predict(x)
        learner.update(x, y)
    return FrozenPredictor(learner, tau)


def all_stopping_times(X, Y, learner_factory):
    """Frozen predictors for every ``tau`` in ``1..len(X)``, for exhaustive checks."""
    learner = learner_factory()
    out = []
    for t, (x, y) in enumerate(zip(X, Y), start=1):
        out.append(FrozenPredictor(copy.deepcopy(learner), t))
        learner.predict(x)
        learner.update(x, y)
    return out


# -- EWOO over the simplex ------------------------------------------------

def simplex_grid(M, resolution=0.01):
    """All points of the simplex with coordinates on a ``resolution`` lattice."""
    steps = int(round(1.0 / resolution))
    if M == 1:
        return np.ones((1, 1))
    pts = [c for c in _compositions(steps, M)]
    return np.array(pts, dtype=np.float64) / steps


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def simplex_points(M, resolution=0.01, particles=100_000, seed=0):
    """Quadrature nodes for integrals over the simplex with the uniform prior.

    A lattice for ``M <= 3``; Dirichlet(1) draws otherwise.
    """
    if M <= 3:
        return simplex_grid(M, resolution)
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(M), size=particles)


def ewoo_simplex(P, resolution=0.01, particles=100_000, seed=0, return_path=False):
    """Average EWOO iterate for losses ``l_t(q) = -log(q . P[t])`` over the simplex.

    ``P`` is a ``(T, M)`` array of positive per-expert probabilities of the
    observed outcomes. ``q_t`` is the posterior mean of ``q`` under weight
    ``exp(-sum_{s<t} l_s(q))``.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    T, M = P.shape
    if M == 1:
        q_bar = np.ones(1)
        return (q_bar, np.ones((T, 1))) if return_path else q_bar
    nodes = simplex_points(M, resolution, particles, seed)
    log_w = np.zeros(len(nodes))
    path = np.empty((T, M))
    for t in range(T):
        w = np.exp(log_w - log_w.max())
        path[t] = (w @ nodes) / w.sum()
        log_w += np.log(np.maximum(nodes @ P[t], losses.PROB_FLOOR))
    q_bar = path.mean(axis=0) if T else np.full(M, 1.0 / M)
    return (q_bar, path) if return_path else q_bar


# -- boosting the confidence ----------------------------------------------

def n_predictors(delta):
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return max(1, math.ceil(math.log(2.0 / delta)))


def conversion_mu(regret_fn, n, M):
    """``mu = R(n/M) / (2 n/M)``, capped at 1/2 so smoothing stays valid."""
    m = n / M
    return min(0.5, regret_fn(m) / (2.0 * m))


@dataclass
class BatchPredictor:
    """``g(x) = sum_i q_i smooth(h_i(x), mu)``."""

    predictors: list
    q: np.ndarray
    mu: float
    chunk_indices: list
    holdout_indices: np.ndarray

    def smoothed(self, x):
        return np.array([losses.smooth(h.predict_proba(x), self.mu) for h in self.predictors])

    def predict_proba(self, x):
        return self.q @ self.smoothed(x)


def boost_confidence(X, Y, delta, learner_factory, regret_fn, seed=0, K=None,
                     resolution=0.01, particles=100_000):
    """Batch predictor with a high-probability excess-risk guarantee.

    ``regret_fn(m)`` is the online learner's regret bound after ``m`` rounds.
    The first ``M * floor(n / (2M))`` examples form ``M`` training chunks; the
    rest, at least half of the data, is used to aggregate.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    M = n_predictors(delta)
    if n < 2 * M:
        raise ValueError(f"need at least 2M = {2 * M} samples, got {n}")
    size = n // (2 * M)
    seeds = np.random.SeedSequence(seed).spawn(M + 1)
    chunks = [np.arange(i * size, (i + 1) * size) for i in range(M)]
    holdout = np.arange(M * size, n)
    predictors = [online_to_batch(X[idx], [Y[j] for j in idx], learner_factory,
                                  seed=seeds[i])
                  for i, idx in enumerate(chunks)]
    mu = conversion_mu(regret_fn, n, M)

    K = K or predictors[0].learner.K
    P = np.empty((len(holdout), M))
    for r, j in enumerate(holdout):
        y = as_label_weights(Y[j], K)
        k = int(np.argmax(y))
        for i, h in enumerate(predictors):
            P[r, i] = losses.smooth(h.predict_proba(X[j]), mu)[k]
    q = ewoo_simplex(P, resolution, particles, seed=seeds[M])
    return BatchPredictor(predictors, q, mu, chunks, holdout)
