"""Proper online learners: Online Gradient Descent and Online Newton Step.

Both predict ``W_t x_t`` with ``W_t`` chosen before seeing the example and
operate in the parameter space of a :class:`~ilr.weights.WeightSet`.
"""

import math

import numpy as np

from . import losses
from .aggregating import as_label_weights


def _param_gradient(weight_set, theta, x, y):
    base, phi = weight_set.features(x)
    z = base[0] + theta @ phi[0]
    g = losses.loss_gradient(z, y)
    return z, phi[0] @ g


class OnlineGradientDescent:
    """Projected OGD with step sizes ``c / sqrt(t)``.

    ``c`` defaults to ``B / (2 R sqrt(2))``.
    """

    def __init__(self, weight_set, R=1.0, c=None, theta0=None):
        self.weight_set = weight_set
        self.R = float(R)
        self.c = weight_set.B / (2.0 * R * math.sqrt(2.0)) if c is None else float(c)
        self.theta = np.zeros(weight_set.dim) if theta0 is None else np.array(theta0, float)
        self.t = 1

    @property
    def K(self):
        return self.weight_set.K

    @property
    def W(self):
        return self.weight_set.matrix(self.theta)

    def predict(self, x):
        return self.W @ np.asarray(x, dtype=np.float64)

    def step(self, x, y):
        """Predict on ``x``, then take a projected gradient step on ``(x, y)``."""
        y = as_label_weights(y, self.K)
        z, g = _param_gradient(self.weight_set, self.theta, x, y)
        eta = self.c / math.sqrt(self.t)
        self.theta = self.weight_set.project_params(self.theta - eta * g)
        self.t += 1
        return z

    def update(self, x, y):
        self.step(x, y)
        return self


def project_in_norm(weight_set, v, A, iters=50, tol=1e-8):
    """``argmin_{u in set} (u - v)^T A (u - v)`` by projected gradient descent."""
    v = np.asarray(v, dtype=np.float64)
    u = weight_set.project_params(v)
    if np.allclose(u, v, rtol=0.0, atol=1e-15):
        return u
    lip = 2.0 * np.linalg.eigvalsh(A)[-1]
    for _ in range(iters):
        u_new = weight_set.project_params(u - 2.0 * A @ (u - v) / lip)
        if np.max(np.abs(u_new - u)) < tol:
            return u_new
        u = u_new
    return u


class OnlineNewtonStep:
    """Online Newton Step with a generalized projection in the ``A`` norm.

    Defaults follow the usual exp-concave tuning: ``alpha = exp(-B R)``,
    ``gamma = min(1 / (4 G D), alpha) / 2`` with gradient bound ``G = 2R`` and
    diameter ``D``, and ``A_0 = eps I`` with ``eps = 1 / (gamma D)^2``.
    """

    def __init__(self, weight_set, R=1.0, gamma=None, eps=None, alpha=None,
                 proj_iters=50, proj_tol=1e-8):
        self.weight_set = weight_set
        D = weight_set.diameter
        G = 2.0 * R
        if alpha is None:
            alpha = math.exp(-weight_set.B * R)
        self.gamma = 0.5 * min(1.0 / (4.0 * G * D), alpha) if gamma is None else float(gamma)
        self.eps = 1.0 / (self.gamma * D) ** 2 if eps is None else float(eps)
        self.A = self.eps * np.eye(weight_set.dim)
        self.theta = np.zeros(weight_set.dim)
        self.proj_iters, self.proj_tol = proj_iters, proj_tol
        self.t = 1

    @property
    def K(self):
        return self.weight_set.K

    @property
    def W(self):
        return self.weight_set.matrix(self.theta)

    def predict(self, x):
        return self.W @ np.asarray(x, dtype=np.float64)

    def step(self, x, y):
        y = as_label_weights(y, self.K)
        z, g = _param_gradient(self.weight_set, self.theta, x, y)
        self.A += np.outer(g, g)
        try:
            direction = np.linalg.solve(self.A, g)
        except np.linalg.LinAlgError:
            self.A += self.eps * np.eye(len(g))
            direction = np.linalg.solve(self.A, g)
        v = self.theta - direction / self.gamma
        self.theta = project_in_norm(self.weight_set, v, self.A,
                                     self.proj_iters, self.proj_tol)
        self.t += 1
        return z

    def update(self, x, y):
        self.step(x, y)
        return self
