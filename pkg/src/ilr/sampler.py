"""Sampling from the log-concave posterior over a weight set.

The target after observing ``(x_s, y_s)`` for ``s < t`` is::

    P(W) ∝ exp(-(1/L) * sum_s loss(W x_s, y_s))    on the weight set.

Two back ends are provided: projected Langevin Monte Carlo, and an exact
finite grid with exponential weights that serves as a validation oracle in
low dimension.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import losses
from .weights import WeightSet


class SamplerBudgetError(RuntimeError):
    """Requested chain work exceeds the configured budget."""


@dataclass(frozen=True)
class PosteriorSpec:
    """Immutable history defining a posterior over ``weight_set``.

    ``X`` holds one input per row, ``Y`` the matching label-weight vectors.
    """

    weight_set: WeightSet
    L: float = 1.0
    X: np.ndarray = None
    Y: np.ndarray = None

    def __post_init__(self):
        ws = self.weight_set
        X = np.zeros((0, ws.d)) if self.X is None else np.asarray(self.X, dtype=np.float64)
        Y = np.zeros((0, ws.K)) if self.Y is None else np.asarray(self.Y, dtype=np.float64)
        X = X.reshape(-1, ws.d)
        Y = Y.reshape(-1, ws.K)
        if len(X) != len(Y):
            raise ValueError("history inputs and labels differ in length")
        if np.any(Y < 0) or np.any(Y.sum(axis=1) > self.L * (1 + 1e-12)):
            raise ValueError("label weights must be nonnegative with l1 norm <= L")
        X.flags.writeable = False
        Y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __len__(self):
        return len(self.X)

    def extend(self, x, y):
        """Return a new spec with one more example appended."""
        X = np.vstack([self.X, np.reshape(x, (1, -1))])
        Y = np.vstack([self.Y, np.reshape(y, (1, -1))])
        return replace(self, X=X, Y=Y)


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "langevin"  # "langevin" or "grid"
    m: int = 64
    steps: int = 200
    step_size: float = None  # None: min(0.5 / (n R^2 max|y|_1 / L + 1), max_step_size)
    max_step_size: float = 0.05
    burn_in: int = 100
    thin: int = 10
    chains: str = "independent"  # or "thinned"
    seed: int = 0
    grid_points: int = 33
    max_grid_dims: int = 4
    budget: int = 50_000_000
    block: int = 1024
    boundary: str = "reflect"  # or "project"

    def __post_init__(self):
        if self.method not in ("langevin", "grid"):
            raise ValueError(f"unknown sampler method {self.method!r}")
        if self.chains not in ("independent", "thinned"):
            raise ValueError(f"unknown chain layout {self.chains!r}")
        if self.m < 1 or self.steps < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValueError("need m >= 1, steps >= 1, burn_in >= 0, thin >= 1")
        if self.boundary not in ("reflect", "project"):
            raise ValueError(f"unknown boundary rule {self.boundary!r}")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step size must be positive")


@dataclass
class SampleSet:
    """Parameter vectors with attached probability weights."""

    weight_set: WeightSet
    params: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.weights is None:
            self.weights = np.full(len(self.params), 1.0 / len(self.params))

    def __len__(self):
        return len(self.params)

    def matrices(self):
        return [self.weight_set.matrix(th) for th in self.params]

    def mean_probs(self, x):
        """``sum_i w_i softmax(W_i x)``."""
        z = self.weight_set.logits(self.params, x)
        return self.weights @ losses.softmax(z)


def _check_member(spec, W):
    if not spec.weight_set.contains(W):
        raise ValueError("W violates the weight-set constraints")


def neg_log_density(spec, W):
    """``(1/L) * sum_s loss(W x_s, y_s)``; convex in ``W``."""
    _check_member(spec, W)
    if len(spec) == 0:
        return 0.0
    Z = spec.X @ np.asarray(W, dtype=np.float64).T
    return float(np.sum(losses.weighted_logistic_loss(Z, spec.Y)) / spec.L)


def neg_log_density_gradient(spec, W):
    """Matrix gradient ``(1/L) sum_s [(sum_k y_sk) softmax(W x_s) - y_s] x_s^T``."""
    _check_member(spec, W)
    W = np.asarray(W, dtype=np.float64)
    if len(spec) == 0:
        return np.zeros_like(W)
    G = losses.loss_gradient(spec.X @ W.T, spec.Y)
    return G.T @ spec.X / spec.L


def project(W, weight_set):
    return weight_set.project(W)


class _ParamPosterior:
    """Vectorized log-density and gradient in parameter space."""

    def __init__(self, spec):
        self.ws = spec.weight_set
        self.L = spec.L
        self.n, self.K = len(spec), spec.weight_set.K
        self.Y = spec.Y
        self.ysum = spec.Y.sum(axis=1)
        if self.n:
            base, phi = self.ws.features(spec.X)
            self.base = base.reshape(-1)
            # (p, n*K) so that logits = base + theta @ phi
            self.phi = np.ascontiguousarray(phi.transpose(1, 0, 2).reshape(self.ws.dim, -1))

    def logits(self, theta):
        z = self.base + theta @ self.phi
        return z.reshape(len(theta), self.n, self.K)

    def value(self, theta):
        theta = np.atleast_2d(theta)
        if not self.n:
            return np.zeros(len(theta))
        ls = losses.log_softmax(self.logits(theta))
        return -(ls.reshape(len(theta), -1) @ self.Y.reshape(-1)) / self.L

    def grad(self, theta):
        if not self.n:
            return np.zeros_like(theta)
        g = self.ysum[:, None] * losses.softmax(self.logits(theta)) - self.Y
        return (g.reshape(len(theta), -1) @ self.phi.T) / self.L


def default_step_size(spec):
    n = len(spec)
    if n == 0:
        return 0.5
    R = float(np.max(np.linalg.norm(spec.X, axis=1)))
    ymax = float(np.max(spec.Y.sum(axis=1)))
    return 0.5 / (n * R * R * ymax / spec.L + 1.0)


def grid_samples(spec, points_per_dim, max_dims=4):
    """Deterministic grid over the set with exact weights ``∝ exp(-f)``."""
    ws = spec.weight_set
    if ws.dim > max_dims:
        raise ValueError(f"grid mode supports at most {max_dims} free dimensions, "
                         f"set has {ws.dim}")
    pts = ws.grid(points_per_dim)
    f = _ParamPosterior(spec).value(pts)
    w = np.exp(-(f - f.min()))
    return SampleSet(ws, pts, w / w.sum())


def _chain_generators(seed, count):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(count)]


def _boundary_map(ws, cfg):
    return ws.reflect_params if cfg.boundary == "reflect" else ws.project_params


def _langevin_block(post, rngs, steps, eta, to_set):
    ws = post.ws
    theta = np.stack([ws.sample_uniform(r) for r in rngs])
    noise = np.stack([r.standard_normal((steps, ws.dim)) for r in rngs], axis=1)
    scale = np.sqrt(2.0 * eta)
    for k in range(steps):
        theta = to_set(theta - eta * post.grad(theta) + scale * noise[k])
    return theta


def draw_samples(spec, cfg, seed=None):
    """Draw samples from the posterior described by ``spec``.

    ``seed`` overrides ``cfg.seed`` and may be a ``SeedSequence``. In Langevin
    mode every chain owns an RNG stream derived from ``(seed, chain index)``,
    so the result does not depend on how chains are blocked.
    """
    if cfg.method == "grid":
        return grid_samples(spec, cfg.grid_points, cfg.max_grid_dims)

    seed = cfg.seed if seed is None else seed
    if cfg.step_size is not None:
        eta = cfg.step_size
    else:
        eta = min(default_step_size(spec), cfg.max_step_size)
    post = _ParamPosterior(spec)
    ws = spec.weight_set
    to_set = _boundary_map(ws, cfg)

    if cfg.chains == "independent":
        if cfg.m * cfg.steps > cfg.budget:
            raise SamplerBudgetError(
                f"m * steps = {cfg.m * cfg.steps} exceeds budget {cfg.budget}")
        rngs = _chain_generators(seed, cfg.m)
        blocks = [_langevin_block(post, rngs[i:i + cfg.block], cfg.steps, eta, to_set)
                  for i in range(0, cfg.m, cfg.block)]
        return SampleSet(ws, np.concatenate(blocks))

    total = cfg.burn_in + cfg.m * cfg.thin
    if total > cfg.budget:
        raise SamplerBudgetError(f"chain length {total} exceeds budget {cfg.budget}")
    (rng,) = _chain_generators(seed, 1)
    theta = ws.sample_uniform(rng)[None]
    scale = np.sqrt(2.0 * eta)
    out = []
    for k in range(total):
        xi = rng.standard_normal((1, ws.dim))
        theta = to_set(theta - eta * post.grad(theta) + scale * xi)
        if k >= cfg.burn_in and (k - cfg.burn_in + 1) % cfg.thin == 0:
            out.append(theta[0])
    return SampleSet(ws, np.array(out))
