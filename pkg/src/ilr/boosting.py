"""Online multiclass boosting with improper logistic weighting (AdaBoost.OLM++).

Expert ``i`` combines the first ``i`` weak learners: its scores are
``s^i = Logistic^i(e_{l^i}, s^{i-1})`` where ``l^i`` is the class chosen by
weak learner ``i`` under a cost matrix derived from ``s^{i-1}``. Each
logistic instance learns a single weight ``alpha`` in ``[-2, 2]`` with the
aggregating strategy (``mu = 1/n``), and Hedge picks which expert to follow.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import losses

ALPHA_MAX = 2.0


# -- cost matrices --------------------------------------------------------

def aux_cost_matrix(s):
    """``C_hat(y, k) = softmax(s)_k - 1[k = y]``: the loss gradient at ``s`` for label ``y``."""
    p = losses.softmax(s)
    return np.tile(p, (len(p), 1)) - np.eye(len(p))


def cost_matrix(s):
    """``C(y, k) = (C_hat(y, k) - C_hat(y, y)) / K``."""
    C_hat = aux_cost_matrix(s)
    return (C_hat - np.diag(C_hat)[:, None]) / len(C_hat)


def in_cost_class(C, tol=1e-12):
    """Zero diagonal, nonnegative entries and row l1 norms at most one."""
    C = np.asarray(C)
    return bool(np.all(np.abs(np.diag(C)) <= tol) and np.all(C >= -tol)
                and np.all(np.abs(C).sum(axis=1) <= 1.0 + tol))


def wlc_baseline(gamma, y, K):
    """``u(k) = (1 - gamma) / K + gamma * 1[k = y]``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("edge must lie in [0, 1]")
    u = np.full(K, (1.0 - gamma) / K)
    u[y] += gamma
    return u


def empirical_edge(numerator, denominator):
    """``sum C_hat(y, l) / sum C_hat(y, y)``; ``nan`` when the denominator vanishes."""
    if denominator == 0.0:
        return float("nan")
    return numerator / denominator


def edge_from_ledger(scores, weak_labels, labels):
    """Empirical edge of one weak learner from its per-round inputs.

    ``scores`` are the ``s^{i-1}`` vectors the learner was queried with.
    """
    num = den = 0.0
    for s, l, y in zip(scores, weak_labels, labels):
        C_hat = aux_cost_matrix(s)
        num += C_hat[y, l]
        den += C_hat[y, y]
    return empirical_edge(num, den)


# -- weak learners --------------------------------------------------------

class WeakLearner:
    """Interface: ``predict(x, C)`` must not change observable state."""

    def predict(self, x, C):
        raise NotImplementedError

    def update(self, x, C, y):
        return self


class CheatingWeakLearner(WeakLearner):
    """Test double drawing its prediction from ``u_{gamma, y}``.

    It peeks at the label through ``label_fn(x)``. The draw for a round is
    fixed at the first ``predict`` and reused until ``update``.
    """

    def __init__(self, gamma, K, label_fn, seed=0):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("edge must lie in [0, 1]")
        self.gamma, self.K = float(gamma), int(K)
        self.label_fn = label_fn
        self.rng = np.random.default_rng(seed)
        self._draw = None

    def predict(self, x, C):
        if self._draw is None:
            self._draw = self.rng.uniform(size=2)
        y = int(self.label_fn(x))
        if self._draw[0] < self.gamma:
            return y
        return min(int(self._draw[1] * self.K), self.K - 1)

    def update(self, x, C, y):
        self._draw = None
        return self


class OneVsAllWeakLearner(WeakLearner):
    """Cost-sensitive one-vs-all linear regressor.

    Keeps one linear model per class predicting the cost of choosing that
    class, trained by online gradient steps on the squared error against
    ``C(y, k)``; predicts the class with the smallest predicted cost.
    """

    def __init__(self, K, d, lr=0.1, seed=0):
        self.K, self.d, self.lr = int(K), int(d), float(lr)
        rng = np.random.default_rng(seed)
        self.V = 1e-3 * rng.standard_normal((K, d + 1))
        self.t = 1

    def _features(self, x):
        return np.append(np.asarray(x, dtype=np.float64), 1.0)

    def predict(self, x, C):
        return int(np.argmin(self.V @ self._features(x)))

    def update(self, x, C, y):
        f = self._features(x)
        err = self.V @ f - np.asarray(C)[y]
        self.V -= (self.lr / math.sqrt(self.t)) * np.outer(err, f)
        self.t += 1
        return self


# -- per-expert logistic weighting ----------------------------------------

class AlphaGridLogistic:
    """Exact aggregating strategy over ``{(alpha I, I)}`` on an ``alpha`` grid.

    For input ``(e_l, s)`` the logits are ``s + alpha e_l``, so the posterior
    mixture of softmax outputs reduces to two weighted sums over the grid.
    """

    def __init__(self, K, n, points=65, alpha_max=ALPHA_MAX):
        if n < 1:
            raise ValueError("horizon must be at least one round")
        self.K = int(K)
        self.mu = 1.0 / n
        self.alpha = np.linspace(-alpha_max, alpha_max, points)
        self.exp_alpha_m1 = np.expm1(self.alpha)
        self.exp_alpha = self.exp_alpha_m1 + 1.0
        self.log_weights = np.zeros(points)

    @staticmethod
    def _shifted(s):
        shift = float(s.max())
        e = np.exp(s - shift)
        return e, float(e.sum()), shift

    def predict(self, l, s, _shifted=None):
        e, total, _ = _shifted or self._shifted(np.asarray(s, dtype=np.float64))
        denom = total + self.exp_alpha_m1 * e[l]
        w = np.exp(self.log_weights)
        inv = w / (w.sum() * denom)
        p = e * inv.sum()
        p[l] = e[l] * (inv @ self.exp_alpha)
        return np.log((1.0 - self.mu) * p + self.mu / self.K)

    def update(self, l, s, y, _shifted=None):
        s = np.asarray(s, dtype=np.float64)
        e, total, shift = _shifted or self._shifted(s)
        # -log softmax(s + alpha e_l)_y for every grid alpha
        loss = np.log(total + self.exp_alpha_m1 * e[l]) + (shift - s[y])
        if y == l:
            loss = loss - self.alpha
        self.log_weights -= loss
        self.log_weights -= self.log_weights.max()
        return self


# -- booster --------------------------------------------------------------

@dataclass
class BoostRound:
    y_hat: int
    i_t: int
    expert_preds: np.ndarray
    weak_preds: np.ndarray
    scores: np.ndarray  # s^0 .. s^N, shape (N + 1, K)


@dataclass
class BoostLedger:
    """Running per-learner totals kept by :class:`AdaBoostOLMpp`."""

    N: int
    mistakes: int = 0
    expert_mistakes: np.ndarray = None
    edge_num: np.ndarray = None
    edge_den: np.ndarray = None
    cost_violations: int = 0
    max_abs_score: float = 0.0
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.expert_mistakes = np.zeros(self.N, dtype=int)
        self.edge_num = np.zeros(self.N)
        self.edge_den = np.zeros(self.N)

    def edges(self):
        return np.array([empirical_edge(a, b) for a, b in zip(self.edge_num, self.edge_den)])


class AdaBoostOLMpp:
    """Online boosting over ``N`` weak learners for ``K`` classes and horizon ``n``."""

    def __init__(self, weak_learners, K, n, alpha_points=65, seed=0, keep_rows=False):
        self.weak = list(weak_learners)
        if not self.weak:
            raise ValueError("need at least one weak learner")
        self.K, self.n = int(K), int(n)
        self.N = len(self.weak)
        self.logistic = [AlphaGridLogistic(K, n, alpha_points) for _ in self.weak]
        self.log_v = np.zeros(self.N)
        self.rng = np.random.default_rng(seed)
        self.ledger = BoostLedger(self.N)
        self.keep_rows = keep_rows
        self.t = 1

    @property
    def hedge_distribution(self):
        v = np.exp(self.log_v - self.log_v.max())
        return v / v.sum()

    def round(self, x, y):
        """Predict on ``x``, then learn from the true class ``y``."""
        y = int(y)
        if not 0 <= y < self.K:
            raise ValueError(f"label {y} out of range for K={self.K}")
        K, N = self.K, self.N
        eye = np.eye(K)
        scores = np.zeros((N + 1, K))
        weak_preds = np.empty(N, dtype=int)
        expert_preds = np.empty(N, dtype=int)
        shifted, aux, costs = [], [], []
        for i in range(N):
            sh = AlphaGridLogistic._shifted(scores[i])
            C_hat = sh[0] / sh[1] - eye
            C = (C_hat - np.diag(C_hat)[:, None]) / K
            shifted.append(sh)
            aux.append(C_hat)
            costs.append(C)
            if C.min() < -1e-12 or C.sum(axis=1).max() > 1.0 + 1e-12:
                self.ledger.cost_violations += 1
            weak_preds[i] = l = self.weak[i].predict(x, C)
            scores[i + 1] = self.logistic[i].predict(l, scores[i], sh)
            expert_preds[i] = int(np.argmax(scores[i + 1]))  # lowest index on ties
        i_t = int(self.rng.choice(N, p=self.hedge_distribution))
        y_hat = int(expert_preds[i_t])

        lg = self.ledger
        wrong = expert_preds != y
        for i in range(N):
            self.weak[i].update(x, costs[i], y)
            self.logistic[i].update(weak_preds[i], scores[i], y, shifted[i])
            lg.edge_num[i] += aux[i][y, weak_preds[i]]
            lg.edge_den[i] += aux[i][y, y]
        self.log_v -= wrong
        self.log_v -= self.log_v.max()
        lg.mistakes += int(y_hat != y)
        lg.expert_mistakes += wrong
        lg.max_abs_score = max(lg.max_abs_score, float(np.abs(scores).max()))
        if self.keep_rows:
            lg.rows.append((self.t, i_t, y_hat, y, int(y_hat != y),
                            lg.expert_mistakes.copy(), lg.edges()))
        self.t += 1
        return BoostRound(y_hat, i_t, expert_preds, weak_preds, scores)


def boost_round(state, x, y):
    """Functional alias for :meth:`AdaBoostOLMpp.round`."""
    return state.round(x, y)


def hedge_bound(expert_mistakes, N, delta):
    """``4 min_i M_i + 2 log(N / delta)``."""
    return 4.0 * float(np.min(expert_mistakes)) + 2.0 * math.log(N / delta)


def run_cheating_boost(K, N, n, gamma, seed=0, alpha_points=65, keep_rows=False):
    """Boost ``N`` cheating weak learners on a stream of uniform labels.

    Inputs are round indices, which the weak learners use to look up the
    label. Returns the booster after ``n`` rounds.
    """
    ss = np.random.SeedSequence(seed)
    label_seed, hedge_seed, *wl_seeds = ss.spawn(N + 2)
    labels = np.random.default_rng(label_seed).integers(0, K, size=n)
    weak = [CheatingWeakLearner(gamma, K, labels.__getitem__, seed=s) for s in wl_seeds]
    booster = AdaBoostOLMpp(weak, K, n, alpha_points, seed=hedge_seed, keep_rows=keep_rows)
    for t in range(n):
        booster.round(t, labels[t])
    return booster
