"""Softmax machinery and the (weighted) multiclass logistic loss.

Every function accepts a single vector or a stack of vectors along the
leading axes; the class axis is always the last one.
"""

import numpy as np

# Floor applied to averaged probabilities before taking logs in
# ``mix_prediction``; predictions are smoothed afterwards anyway.
PROB_FLOOR = 1e-300


def _as_logits(z):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 0 or z.shape[-1] < 2:
        raise ValueError("logits need at least two classes")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    return z


def _rowmax(z):
    # numpy reductions over a short trailing axis are slow; unroll small K
    if z.shape[-1] > 8:
        return np.max(z, axis=-1)
    out = z[..., 0].copy()
    for k in range(1, z.shape[-1]):
        np.maximum(out, z[..., k], out=out)
    return out


def _rowsum(z):
    if z.shape[-1] > 8:
        return np.sum(z, axis=-1)
    out = z[..., 0].copy()
    for k in range(1, z.shape[-1]):
        out += z[..., k]
    return out


def logsumexp(z):
    """Stable log(sum(exp(z))) over the class axis."""
    z = np.asarray(z, dtype=np.float64)
    zmax = _rowmax(z)
    return np.log(_rowsum(np.exp(z - zmax[..., None]))) + zmax


def log_softmax(z):
    z = _as_logits(z)
    return z - logsumexp(z)[..., None]


def softmax(z):
    """Map logits to the simplex, ``p_k = exp(z_k) / sum_j exp(z_j)``."""
    z = _as_logits(z)
    e = np.exp(z - _rowmax(z)[..., None])
    return e / _rowsum(e)[..., None]


def softmax_pinv(p):
    """Coordinatewise log; a right inverse of :func:`softmax` on the open simplex.

    Raises ``ValueError`` if any coordinate is not strictly positive. Callers
    are expected to smooth first.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any(~(p > 0)):
        raise ValueError("softmax_pinv needs strictly positive probabilities")
    return np.log(p)


def smooth(p, mu):
    """Mix ``p`` with the uniform distribution: ``(1 - mu) p + mu / K``."""
    if not 0.0 <= mu <= 0.5:
        raise ValueError(f"smoothing parameter must lie in [0, 1/2], got {mu}")
    p = np.asarray(p, dtype=np.float64)
    K = p.shape[-1]
    return (1.0 - mu) * p + mu / K


def _as_weights(y):
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0):
        raise ValueError("label weights must be nonnegative")
    return y


def weighted_logistic_loss(z, y):
    """``-sum_k y_k log softmax(z)_k``, evaluated through log-sum-exp."""
    y = _as_weights(y)
    return -np.sum(y * log_softmax(z), axis=-1)


def logistic_loss(z, label):
    """Unweighted loss ``-log softmax(z)_label`` for an integer class index."""
    ls = log_softmax(z)
    label = np.asarray(label)
    if np.any(label < 0) or np.any(label >= ls.shape[-1]):
        raise ValueError("class index out of range")
    return -np.take_along_axis(ls, label[..., None], axis=-1)[..., 0]


def binary_logistic_loss(z, y):
    """``log(1 + exp(-y z))`` for a label in {-1, +1}."""
    if y not in (-1, 1):
        raise ValueError(f"binary label must be -1 or +1, got {y}")
    return float(np.logaddexp(0.0, -y * float(z)))


def loss_gradient(z, y):
    """Gradient of the weighted loss in ``z``: ``sum(y) * softmax(z) - y``."""
    y = _as_weights(y)
    return np.sum(y, axis=-1, keepdims=True) * softmax(z) - y


def mix_prediction(support, weights):
    """Mixed prediction ``log(sum_i w_i softmax(z_i))`` for a finite mixture.

    ``support`` is an ``(m, K)`` stack of logits and ``weights`` a probability
    vector of length ``m``. Averaging happens in probability space, so the
    result certifies 1-mixability of the unweighted loss (with equality) and
    1/L-mixability of the weighted one.
    """
    support = np.atleast_2d(np.asarray(support, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    if support.shape[0] == 0:
        raise ValueError("mixture support is empty")
    if weights.shape != (support.shape[0],):
        raise ValueError("one weight per support point is required")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("mixture weights must form a probability vector")
    p = weights @ softmax(support)
    return np.log(np.maximum(p, PROB_FLOOR))


def mix_probabilities(log_weights, probs):
    """Average ``probs`` (rows) under unnormalized log-weights."""
    lw = np.asarray(log_weights, dtype=np.float64)
    w = np.exp(lw - np.max(lw))
    w /= w.sum()
    return w @ probs
