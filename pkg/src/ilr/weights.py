"""Convex decision sets of weight matrices.

A :class:`WeightSet` describes ``W`` as an affine image of a free parameter
vector ``theta``::

    W(theta) = offset + sum_j theta_j * basis[j]

Three families are supported:

``ball``
    every row of the ``K x d`` matrix is free, with ``||W_k|| <= B``.
``pinned``
    the last row is fixed to zero and the others are norm-bounded. With
    ``K = 2`` this is the usual embedding of binary logistic regression.
``boosting``
    ``W = (alpha I_K, I_K)`` with ``alpha`` in ``[-alpha_max, alpha_max]``,
    the one-parameter family used to learn weak-learner weights.

Samplers, grids and the proper baselines all work in parameter space; the
``matrix``/``params`` pair converts back and forth.
"""

import numpy as np

KINDS = ("ball", "pinned", "boosting")
NORMS = ("l2", "linf")


class WeightSet:
    def __init__(self, K, d, B, kind="ball", norm="l2"):
        if kind not in KINDS:
            raise ValueError(f"unknown weight-set kind {kind!r}")
        if norm not in NORMS:
            raise ValueError(f"unknown row norm {norm!r}")
        if K < 2 or d < 1 or not B > 0:
            raise ValueError("need K >= 2, d >= 1 and B > 0")
        self.K, self.d, self.B = int(K), int(d), float(B)
        self.kind, self.norm = kind, norm

        if kind == "boosting":
            if d != 2 * K:
                raise ValueError("boosting sets act on 2K-dimensional inputs")
            self.n_rows, self.row_dim = 1, 1
            basis = np.zeros((1, K, d))
            basis[0, :, :K] = np.eye(K)
            offset = np.zeros((K, d))
            offset[:, K:] = np.eye(K)
        else:
            self.n_rows = K if kind == "ball" else K - 1
            self.row_dim = d
            p = self.n_rows * d
            basis = np.zeros((p, K, d))
            for j in range(p):
                basis[j, j // d, j % d] = 1.0
            offset = np.zeros((K, d))
        self.basis = basis
        self.offset = offset

    @classmethod
    def ball(cls, K, d, B, norm="l2"):
        return cls(K, d, B, "ball", norm)

    @classmethod
    def pinned(cls, K, d, B, norm="l2"):
        return cls(K, d, B, "pinned", norm)

    @classmethod
    def boosting(cls, K, alpha_max=2.0):
        return cls(K, 2 * K, alpha_max, "boosting", "linf")

    def __repr__(self):
        return (f"WeightSet(K={self.K}, d={self.d}, B={self.B}, "
                f"kind={self.kind!r}, norm={self.norm!r})")

    @property
    def dim(self):
        """Linear-algebraic dimension of the set (number of free parameters)."""
        return self.basis.shape[0]

    @property
    def diameter(self):
        """Euclidean diameter of the parameter set."""
        if self.norm == "l2":
            return 2.0 * self.B * np.sqrt(self.n_rows)
        return 2.0 * self.B * np.sqrt(self.dim)

    # -- parameter/matrix conversion -------------------------------------

    def matrix(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        return self.offset + np.tensordot(theta, self.basis, axes=([-1], [0]))

    def params(self, W):
        W = np.asarray(W, dtype=np.float64)
        if self.kind == "boosting":
            return np.array([W[0, 0]])
        return W[: self.n_rows].reshape(-1).copy()

    def contains(self, W, tol=1e-9):
        W = np.asarray(W, dtype=np.float64)
        if W.shape != (self.K, self.d):
            return False
        theta = self.params(W)
        if np.max(np.abs(self.matrix(theta) - W)) > tol:
            return False
        return bool(np.all(self.row_norms(theta) <= self.B + tol))

    def row_norms(self, theta):
        rows = np.asarray(theta, dtype=np.float64).reshape(
            np.shape(theta)[:-1] + (self.n_rows, self.row_dim))
        if self.norm == "l2":
            return np.sqrt(np.sum(rows * rows, axis=-1))
        return np.max(np.abs(rows), axis=-1)

    # -- projection ------------------------------------------------------

    def project_params(self, theta):
        """Euclidean projection of (a stack of) parameter vectors onto the set."""
        theta = np.asarray(theta, dtype=np.float64)
        if self.norm == "linf":
            return np.clip(theta, -self.B, self.B)
        shape = theta.shape
        rows = theta.reshape(shape[:-1] + (self.n_rows, self.row_dim))
        norms = np.sqrt(np.sum(rows * rows, axis=-1, keepdims=True))
        scale = np.minimum(1.0, self.B / np.maximum(norms, 1e-300))
        return (rows * scale).reshape(shape)

    def reflect_params(self, theta):
        """Fold points that overshoot the boundary back inside, then project.

        For the sup-norm this mirrors each coordinate at ``+-B``; for l2 rows
        the radius ``r > B`` is mapped to ``2B - r``. Points that overshoot by
        more than ``B`` end up on the boundary via the final projection.
        """
        theta = np.asarray(theta, dtype=np.float64)
        if self.norm == "linf":
            B = self.B
            theta = np.where(theta > B, 2 * B - theta, theta)
            theta = np.where(theta < -B, -2 * B - theta, theta)
            return np.clip(theta, -B, B)
        shape = theta.shape
        rows = theta.reshape(shape[:-1] + (self.n_rows, self.row_dim))
        r = np.sqrt(np.sum(rows * rows, axis=-1, keepdims=True))
        over = r > self.B
        scale = np.where(over, np.maximum(2 * self.B - r, 0.0) / np.maximum(r, 1e-300), 1.0)
        return self.project_params((rows * scale).reshape(shape))

    def project(self, W):
        """Project an arbitrary ``K x d`` matrix onto the set.

        Rows are rescaled to norm ``B`` (or clipped, for the sup-norm) and
        structural entries are restored.
        """
        return self.matrix(self.project_params(self.params(W)))

    # -- features --------------------------------------------------------

    def features(self, X):
        """Per-example feature tensors for evaluating logits in parameter space.

        Returns ``(base, phi)`` with ``base`` of shape ``(n, K)`` and ``phi``
        of shape ``(n, p, K)`` such that ``W(theta) x_s = base[s] + theta @ phi[s]``.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        base = X @ self.offset.T
        phi = np.einsum("pkd,nd->npk", self.basis, X)
        return base, phi

    def logits(self, theta, x):
        """Scores ``W(theta) x`` for a stack of parameters and one input."""
        base, phi = self.features(x)
        return base[0] + np.asarray(theta, dtype=np.float64) @ phi[0]

    # -- sampling and grids ----------------------------------------------

    def sample_uniform(self, rng, size=None):
        """Uniform draws from the parameter set."""
        shape = () if size is None else (size,)
        if self.norm == "linf":
            return rng.uniform(-self.B, self.B, size=shape + (self.dim,))
        g = rng.standard_normal(shape + (self.n_rows, self.row_dim))
        g /= np.linalg.norm(g, axis=-1, keepdims=True)
        r = self.B * rng.uniform(size=shape + (self.n_rows, 1)) ** (1.0 / self.row_dim)
        return (g * r).reshape(shape + (self.dim,))

    def grid(self, points_per_dim):
        """Cartesian grid over ``[-B, B]^p`` restricted to the set.

        Endpoints are included, so for one free dimension the grid is
        ``linspace(-B, B, points_per_dim)``.
        """
        if points_per_dim < 2:
            raise ValueError("need at least two grid points per dimension")
        axis = np.linspace(-self.B, self.B, int(points_per_dim))
        if self.dim == 1:
            return axis[:, None]
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        pts = np.stack(mesh, axis=-1).reshape(-1, self.dim)
        keep = np.all(self.row_norms(pts) <= self.B * (1 + 1e-12), axis=-1)
        return pts[keep]
