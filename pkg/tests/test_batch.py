import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ilr.aggregating import AggregatingRegressor, theoretical_regret_bound
from ilr.batch import (all_stopping_times, boost_confidence, conversion_mu, ewoo_simplex,
                       n_predictors, online_to_batch, simplex_grid, simplex_points)
from ilr.sampler import SamplerConfig
from ilr.weights import WeightSet

WS = WeightSet.pinned(2, 1, 2.0)


def factory(n=50):
    return lambda: AggregatingRegressor(WS, n=n, sampler=SamplerConfig(method="grid",
                                                                       grid_points=33))


def regret_fn(m):
    return theoretical_regret_bound(1, 1.0, 2.0, 1.0, m, mu=1.0 / m)


def toy_data(n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 1))
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-1.5 * X[:, 0]))).astype(int)
    return X, 1 - y  # class 0 is the free row


def ewoo_on_nodes(P, nodes):
    """Reference EWOO average by plain exponential weights over ``nodes``."""
    log_w = np.zeros(len(nodes))
    path = []
    for p in P:
        w = np.exp(log_w - log_w.max())
        path.append(w @ nodes / w.sum())
        log_w += np.log(nodes @ p)
    return np.mean(path, axis=0)


class TestSettings:
    @pytest.mark.parametrize("delta, M", [(0.5, 2), (0.1, 3), (0.05, 4), (0.01, 6)])
    def test_n_predictors(self, delta, M):
        assert n_predictors(delta) == M

    def test_n_predictors_rejects(self):
        with pytest.raises(ValueError):
            n_predictors(1.0)

    def test_conversion_mu(self):
        assert conversion_mu(lambda m: 10.0, 300, 3) == pytest.approx(0.05)
        assert conversion_mu(lambda m: 1e6, 300, 3) == 0.5


class TestOnlineToBatch:
    def test_empty_chunk(self):
        with pytest.raises(ValueError):
            online_to_batch(np.zeros((0, 1)), [], factory())

    def test_stopping_time_range(self):
        X, y = toy_data(7)
        taus = {online_to_batch(X, y, factory(), seed=s).tau for s in range(200)}
        assert taus == set(range(1, 8))

    def test_matches_exhaustive_enumeration(self):
        X, y = toy_data(12, seed=1)
        frozen = all_stopping_times(X, y, factory())
        for seed in range(10):
            h = online_to_batch(X, y, factory(), seed=seed)
            ref = frozen[h.tau - 1]
            for x in ([-0.5], [0.0], [0.9]):
                np.testing.assert_array_equal(h.predict_proba(x), ref.predict_proba(x))

    def test_first_stopping_time_is_prior(self):
        X, y = toy_data(5)
        h = all_stopping_times(X, y, factory())[0]
        np.testing.assert_allclose(h.predict_proba([0.7]), 0.5, atol=1e-12)


class TestEWOO:
    def test_single_expert(self):
        np.testing.assert_array_equal(ewoo_simplex(np.full((10, 1), 0.3)), [1.0])

    def test_symmetric(self):
        P = np.tile([0.6, 0.6], (20, 1))
        np.testing.assert_allclose(ewoo_simplex(P), [0.5, 0.5], atol=1e-12)

    def test_better_expert_dominates(self):
        P = np.tile([0.9, 0.5], (200, 1))
        q, path = ewoo_simplex(P, return_path=True)
        assert path[-1, 0] > 0.9
        assert q[0] > 0.5

    def test_lattice(self):
        g = simplex_grid(3, 0.1)
        assert len(g) == math.comb(12, 2)
        np.testing.assert_allclose(g.sum(axis=1), 1.0)
        assert simplex_points(2).shape == (101, 2)

    @given(st.integers(1, 3), st.integers(0, 30), st.integers(0, 1000))
    def test_iterates_on_simplex(self, M, T, seed):
        P = np.random.default_rng(seed).uniform(0.05, 1.0, size=(T, M))
        q = ewoo_simplex(P, resolution=0.05)
        assert q.shape == (M,)
        assert np.all(q >= 0) and q.sum() == pytest.approx(1.0)

    def test_particles_agree_with_fine_lattice(self):
        P = np.random.default_rng(0).uniform(0.1, 1.0, size=(30, 4))
        q = ewoo_simplex(P, particles=100_000, seed=1)
        ref = ewoo_on_nodes(P, simplex_grid(4, 0.02))
        np.testing.assert_allclose(q, ref, atol=0.01)

    def test_regret_against_best_mixture(self):
        rng = np.random.default_rng(2)
        P = rng.uniform(0.05, 1.0, size=(200, 2))
        _, path = ewoo_simplex(P, return_path=True)
        learner = -np.log(np.einsum("tm,tm->t", path, P)).sum()
        best = min(-np.log(P @ q).sum() for q in simplex_grid(2, 0.001))
        assert learner - best <= 2 * math.log(200) + 1


class TestBoostConfidence:
    def test_structure(self):
        X, y = toy_data(200, seed=3)
        g = boost_confidence(X, y, 0.1, factory(33), regret_fn, seed=0)
        assert len(g.predictors) == 3
        sizes = {len(c) for c in g.chunk_indices}
        assert sizes == {200 // 6}
        used = np.concatenate(g.chunk_indices + [g.holdout_indices])
        np.testing.assert_array_equal(np.sort(used), np.arange(200))
        assert len(g.holdout_indices) >= 100
        assert g.q.sum() == pytest.approx(1.0)

    def test_probability_floor(self):
        X, y = toy_data(120, seed=4)
        g = boost_confidence(X, y, 0.1, factory(20), regret_fn, seed=1)
        for x in np.linspace(-1, 1, 9):
            p = g.predict_proba([x])
            assert p.sum() == pytest.approx(1.0)
            assert p.min() >= g.mu / 2 * (1 - 1e-12)

    def test_deterministic(self):
        X, y = toy_data(90, seed=5)
        a = boost_confidence(X, y, 0.1, factory(15), regret_fn, seed=7)
        b = boost_confidence(X, y, 0.1, factory(15), regret_fn, seed=7)
        np.testing.assert_array_equal(a.q, b.q)

    def test_too_few_samples(self):
        X, y = toy_data(4)
        with pytest.raises(ValueError):
            boost_confidence(X, y, 0.1, factory(), regret_fn)
