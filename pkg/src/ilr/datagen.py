"""Synthetic example streams and the margin lower-bound adversary.

Binary examples use labels in {-1, +1}. Online learners in this package
work with class indices, and :func:`binary_to_class` maps ``+1`` to class 0
(the free row of a pinned two-class weight set) and ``-1`` to class 1.
"""

import csv
import io
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import losses


def binary_to_class(y):
    return 0 if y > 0 else 1


# -- stochastic streams ----------------------------------------------------

@dataclass
class ExampleStream:
    """A finite stream of inputs ``X`` (n, d) and integer labels ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.y)

    def __iter__(self):
        return iter(zip(self.X, self.y))

    def to_csv(self):
        """Serialize as CSV with columns ``t, x1..xd, y``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.X.shape[1]
        w.writerow(["t"] + [f"x{j + 1}" for j in range(d)] + ["y"])
        for t, (x, y) in enumerate(self, start=1):
            w.writerow([t] + [repr(float(v)) for v in x] + [int(y)])
        return buf.getvalue()


def uniform_ball(rng, n, d, R=1.0):
    """``n`` points uniform in the Euclidean ball of radius ``R``."""
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (R * rng.uniform(size=(n, 1)) ** (1.0 / d))


def stochastic_stream(W, d, K, n, noise=0.0, seed=0, R=1.0):
    """Inputs uniform on the radius-``R`` ball, labels drawn from ``softmax(W x)``.

    With probability ``noise`` a label is replaced by a uniform class.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (K, d):
        raise ValueError(f"W must have shape ({K}, {d})")
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    X = uniform_ball(rng, n, d, R)
    P = losses.softmax(X @ W.T)
    y = (rng.uniform(size=(n, 1)) > np.cumsum(P, axis=1)).sum(axis=1)
    y = np.minimum(y, K - 1)
    flip = rng.uniform(size=n) < noise
    y[flip] = rng.integers(0, K, size=int(flip.sum()))
    return ExampleStream(X, y)


def margin_stream(n, gamma, seed=0, spread=0.0):
    """One-dimensional separable stream: ``y`` Rademacher, ``x = y * u``.

    ``u`` is ``gamma`` when ``spread`` is 0, else uniform on
    ``[gamma, gamma + spread]``. Returns ``(X, y)`` with ``y`` in {-1, +1}.
    """
    rng = np.random.default_rng(seed)
    y = rng.choice([-1, 1], size=n)
    u = gamma + spread * rng.uniform(size=n)
    return (y * u)[:, None].astype(np.float64), y


# -- threshold trees ------------------------------------------------------

def tree_depth(delta):
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    # tiny tolerance so exact powers of two are not lost to rounding
    return int(math.floor(math.log2(2.0 / delta) + 1e-12))


@dataclass(frozen=True)
class ThresholdTree:
    """Bisection tree over [0, 1] of depth ``floor(log2(2 / delta))``.

    Node ``t`` on a path sits at the midpoint of the current interval. A sign
    of -1 moves the lower end up to the node and +1 moves the upper end down,
    so every threshold strictly between the terminal midpoint ``z_star`` and
    the nodes labels the path correctly.
    """

    delta: float

    @property
    def depth(self):
        return tree_depth(self.delta)

    def path(self, eps):
        """Node values along ``eps`` (length ``depth``) and the terminal ``z_star``."""
        eps = list(eps)
        if len(eps) != self.depth:
            raise ValueError(f"path needs {self.depth} signs")
        lo, hi = 0.0, 1.0
        z = np.empty(len(eps))
        for t, e in enumerate(eps):
            z[t] = 0.5 * (lo + hi)
            if e == -1:
                lo = z[t]
            elif e == 1:
                hi = z[t]
            else:
                raise ValueError("signs must be -1 or +1")
        z_star = 0.5 * (lo + hi)
        assert z_star > 0.0
        return z, z_star

    def node(self, prefix):
        """Value of the node reached after the signs in ``prefix``."""
        lo, hi = 0.0, 1.0
        for e in prefix:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if e == -1 else (lo, mid)
        return 0.5 * (lo + hi)

    def paths(self):
        """All ``2**depth`` sign sequences."""
        return itertools.product((-1, 1), repeat=self.depth)


def build_threshold_tree(delta):
    tree = ThresholdTree(float(delta))
    tree_depth(tree.delta)
    return tree


# -- margin adversary -----------------------------------------------------

def max_margin(d):
    """Largest admissible margin ``1 / (4 sqrt(5 d))``."""
    return 1.0 / (4.0 * math.sqrt(5.0 * d))


def margin_delta(d, gamma):
    if not 0.0 < gamma <= max_margin(d) * (1 + 1e-12):
        raise ValueError(f"gamma must lie in (0, {max_margin(d)}] for d={d}")
    return min(1.0, math.sqrt(gamma * 4.0 * math.sqrt(5.0 * d)))


def lower_bound_mistakes(d, gamma):
    """``(d/4) * floor(log2(1 / (5 gamma sqrt(d))))``."""
    return d / 4.0 * math.floor(math.log2(1.0 / (5.0 * gamma * math.sqrt(d))))


@dataclass
class MarginInstance:
    """Binary dataset in ``d + 1`` dimensions with a certifying direction ``w``."""

    d: int
    gamma: float
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray

    @property
    def margins(self):
        return (self.X @ self.w) * self.y


def verify_shattering(instance, tol=1e-12):
    """Check ``||w|| <= 1``, ``||x_t|| <= 2`` and ``y_t <w, x_t> >= gamma``."""
    X = np.atleast_2d(np.asarray(instance.X, dtype=np.float64))
    if np.linalg.norm(instance.w) > 1.0 + tol:
        return False
    if len(X) and np.max(np.linalg.norm(X, axis=1)) > 2.0 + tol:
        return False
    return bool(np.all(instance.margins >= instance.gamma - tol))


class RandomGuesser:
    """Predicts a uniformly random sign and ignores feedback."""

    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)

    def predict(self, x):
        return float(self.rng.choice([-1.0, 1.0]))

    def update(self, x, y):
        return self


def _certificate(tree, d, z_stars):
    delta = tree.delta
    w = np.empty(d + 1)
    w[:d] = delta / np.asarray(z_stars)
    w[d] = -delta
    return w / np.linalg.norm(w)


def margin_adversary(d, gamma, learner, seed=0, n=None):
    """Play the concatenated threshold-tree instance against ``learner``.

    Labels are fresh Rademacher signs and each input is
    ``e_{d+1} + z * e_k`` for the current block ``k``. After the ``d * depth``
    tree rounds the final example is repeated up to ``n`` rounds. ``learner``
    needs ``predict(x) -> score`` and may have ``update(x, y)``; a round is a
    mistake when ``sign(score) != y``.

    Returns the :class:`MarginInstance` and the number of mistakes.
    """
    delta = margin_delta(d, gamma)
    tree = build_threshold_tree(delta)
    D = tree.depth
    n_tree = d * D
    n = n_tree if n is None else int(n)
    if n < 1:
        raise ValueError("need at least one round")
    # a child stream, so a learner seeded with the same integer stays independent
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    eps = rng.choice([-1, 1], size=(d, D))

    X = np.zeros((n, d + 1))
    X[:, d] = 1.0
    y = np.empty(n, dtype=int)
    for t in range(min(n, n_tree)):
        k, tau = divmod(t, D)
        X[t, k] = tree.node(eps[k, :tau])
        y[t] = eps[k, tau]
    if n > n_tree:
        X[n_tree:] = X[n_tree - 1]
        y[n_tree:] = y[n_tree - 1]

    mistakes = 0
    for x, label in zip(X, y):
        score = learner.predict(x)
        mistakes += int(np.sign(score) != label)
        if hasattr(learner, "update"):
            learner.update(x, int(label))

    z_stars = [tree.path(eps[k])[1] for k in range(d)]
    w = _certificate(tree, d, z_stars)
    return MarginInstance(d, float(gamma), X, y, w), mistakes


def worst_case_margin(d, gamma):
    """Smallest normalized margin of the certificate over all sign paths.

    Exhaustive over the ``2**depth`` paths of one block; the other blocks are
    set to the path with the largest weight, which is the worst case since
    blocks only interact through the norm of ``w``.
    """
    delta = margin_delta(d, gamma)
    tree = build_threshold_tree(delta)
    rows = []
    for eps in tree.paths():
        z, z_star = tree.path(eps)
        m = float(np.min(delta * (z / z_star - 1.0) * np.asarray(eps)))
        rows.append((m, delta / z_star))
    w_max = max(r[1] for r in rows)
    return min(m / math.sqrt(delta ** 2 + w ** 2 + (d - 1) * w_max ** 2)
               for m, w in rows)
