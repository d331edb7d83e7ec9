import math

import numpy as np
import pytest

from ilr.sampler import (PosteriorSpec, SamplerBudgetError, SamplerConfig, draw_samples,
                         grid_samples, neg_log_density, neg_log_density_gradient, project)
from ilr.weights import WeightSet


def random_spec(ws, n, seed, L=1.0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, ws.d))
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True))
    Y = np.eye(ws.K)[rng.integers(0, ws.K, size=n)]
    return PosteriorSpec(ws, L, X, Y)


class TestWeightSet:
    def test_project_example(self):
        ws = WeightSet.ball(1 + 1, 2, 2.5)
        W = np.array([[3.0, 4.0], [0.1, 0.2]])
        np.testing.assert_allclose(project(W, ws), [[1.5, 2.0], [0.1, 0.2]])

    def test_project_identity_inside(self):
        ws = WeightSet.ball(3, 2, 1.0)
        W = np.array([[0.5, 0.5], [0.0, -1.0], [0.2, 0.1]])
        np.testing.assert_array_equal(project(W, ws), W)

    def test_project_idempotent(self):
        ws = WeightSet.ball(3, 4, 1.0)
        W = np.random.default_rng(0).normal(scale=3, size=(3, 4))
        P = project(W, ws)
        np.testing.assert_allclose(project(P, ws), P)
        assert ws.contains(P)

    def test_boosting_projection(self):
        ws = WeightSet.boosting(3)
        W = np.full((3, 6), 7.0)
        P = project(W, ws)
        np.testing.assert_array_equal(P[:, :3], 2.0 * np.eye(3))
        np.testing.assert_array_equal(P[:, 3:], np.eye(3))

    def test_pinned_row(self):
        ws = WeightSet.pinned(3, 2, 1.0)
        W = ws.matrix(ws.sample_uniform(np.random.default_rng(1)))
        np.testing.assert_array_equal(W[-1], 0.0)
        assert ws.dim == 4

    def test_grid_endpoints(self):
        ws = WeightSet.pinned(2, 1, 2.0)
        np.testing.assert_allclose(ws.grid(5)[:, 0], [-2, -1, 0, 1, 2])

    def test_reflection_stays_inside(self):
        ws = WeightSet.ball(2, 3, 1.0)
        theta = np.random.default_rng(2).normal(scale=2, size=(100, ws.dim))
        assert np.all(ws.row_norms(ws.reflect_params(theta)) <= 1.0 + 1e-12)

    def test_features_reproduce_logits(self):
        ws = WeightSet.ball(3, 2, 2.0)
        rng = np.random.default_rng(4)
        theta = ws.sample_uniform(rng)
        x = rng.normal(size=2)
        np.testing.assert_allclose(ws.logits(theta, x), ws.matrix(theta) @ x)


class TestDensity:
    def test_empty_history(self):
        ws = WeightSet.ball(3, 2, 1.0)
        spec = PosteriorSpec(ws)
        W = ws.matrix(ws.sample_uniform(np.random.default_rng(0)))
        assert neg_log_density(spec, W) == 0.0
        np.testing.assert_array_equal(neg_log_density_gradient(spec, W), 0.0)

    def test_zero_matrix_gives_log_K(self):
        ws = WeightSet.ball(4, 2, 1.0)
        spec = PosteriorSpec(ws, 1.0, [[0.3, 0.1]], [np.eye(4)[2]])
        assert neg_log_density(spec, np.zeros((4, 2))) == pytest.approx(math.log(4))

    def test_constraint_violation(self):
        ws = WeightSet.ball(2, 1, 1.0)
        with pytest.raises(ValueError):
            neg_log_density(PosteriorSpec(ws), np.array([[2.0], [0.0]]))

    def test_label_weights_above_L_rejected(self):
        ws = WeightSet.ball(2, 1, 1.0)
        with pytest.raises(ValueError):
            PosteriorSpec(ws, 1.0, [[0.5]], [[1.0, 1.0]])

    def test_history_is_immutable(self):
        spec = random_spec(WeightSet.ball(2, 1, 1.0), 3, 0)
        with pytest.raises(ValueError):
            spec.X[0, 0] = 5.0

    def test_convexity(self):
        ws = WeightSet.ball(3, 2, 2.0)
        spec = random_spec(ws, 20, 1)
        rng = np.random.default_rng(5)
        for _ in range(100):
            A, B = (ws.matrix(ws.sample_uniform(rng)) for _ in range(2))
            mid = neg_log_density(spec, (A + B) / 2)
            assert mid <= (neg_log_density(spec, A) + neg_log_density(spec, B)) / 2 + 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        ws = WeightSet.ball(3, 2, 2.0)
        spec = random_spec(ws, 1 if seed == 0 else 15, seed, L=1.5)
        rng = np.random.default_rng(seed)
        W = np.zeros((3, 2)) if seed == 0 else 0.5 * ws.matrix(ws.sample_uniform(rng))
        G = neg_log_density_gradient(spec, W)
        h = 1e-6
        fd = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            E = np.zeros_like(W)
            E[idx] = h
            fd[idx] = (neg_log_density(spec, W + E) - neg_log_density(spec, W - E)) / (2 * h)
        assert np.max(np.abs(fd - G)) <= 1e-5 * max(np.max(np.abs(G)), 1e-12)

    def test_gradient_norm_bound(self):
        ws = WeightSet.ball(3, 2, 2.0)
        rng = np.random.default_rng(8)
        for seed in range(20):
            spec = random_spec(ws, 10, seed)
            W = ws.matrix(ws.sample_uniform(rng))
            R = np.max(np.linalg.norm(spec.X, axis=1))
            bound = 2 * spec.Y.sum(axis=1).max() * R * len(spec) / spec.L
            assert np.abs(neg_log_density_gradient(spec, W)).max() <= bound


class TestDrawSamples:
    def test_feasible_and_deterministic(self):
        ws = WeightSet.ball(2, 2, 1.0)
        spec = random_spec(ws, 10, 0)
        cfg = SamplerConfig(m=32, steps=50, seed=3)
        a, b = draw_samples(spec, cfg), draw_samples(spec, cfg)
        np.testing.assert_array_equal(a.params, b.params)
        assert all(ws.contains(W) for W in a.matrices())

    def test_blocking_does_not_change_output(self):
        ws = WeightSet.ball(2, 1, 1.0)
        spec = random_spec(ws, 5, 1)
        a = draw_samples(spec, SamplerConfig(m=40, steps=20, block=7))
        b = draw_samples(spec, SamplerConfig(m=40, steps=20, block=1024))
        np.testing.assert_array_equal(a.params, b.params)

    def test_empty_history_mean_is_centered(self):
        ws = WeightSet.ball(2, 2, 1.0)
        s = draw_samples(PosteriorSpec(ws), SamplerConfig(m=2000, steps=50, seed=4))
        se = s.params.std(axis=0) / math.sqrt(len(s))
        assert np.all(np.abs(s.params.mean(axis=0)) <= 4 * se)

    def test_grid_empty_history_uniform(self):
        ws = WeightSet.pinned(2, 1, 1.0)
        g = draw_samples(PosteriorSpec(ws), SamplerConfig(method="grid", grid_points=9))
        np.testing.assert_allclose(g.weights, 1 / 9)

    def test_grid_dimension_cap(self):
        with pytest.raises(ValueError):
            grid_samples(PosteriorSpec(WeightSet.ball(3, 2, 1.0)), 5)

    def test_budget(self):
        spec = PosteriorSpec(WeightSet.ball(2, 1, 1.0))
        with pytest.raises(SamplerBudgetError):
            draw_samples(spec, SamplerConfig(m=100, steps=100, budget=1000))

    def test_thinned_chain(self):
        ws = WeightSet.ball(2, 1, 1.0)
        s = draw_samples(random_spec(ws, 5, 2),
                         SamplerConfig(m=25, chains="thinned", burn_in=10, thin=3))
        assert len(s) == 25
        assert np.all(ws.row_norms(s.params) <= 1.0 + 1e-12)

    def test_informative_history_sign(self):
        ws = WeightSet.pinned(2, 1, 3.0)
        rng = np.random.default_rng(0)
        X = rng.uniform(0.2, 1.0, size=(40, 1))
        Y = np.eye(2)[(rng.uniform(size=40) < 0.15).astype(int)]  # mostly class 0
        spec = PosteriorSpec(ws, 1.0, X, Y)
        g = grid_samples(spec, 10_000)
        s = draw_samples(spec, SamplerConfig(m=4096, seed=1))
        grid_mean = float(g.weights @ g.params[:, 0])
        mean = s.params[:, 0].mean()
        se = s.params[:, 0].std() / math.sqrt(len(s))
        assert grid_mean > 0 and mean > 0
        assert abs(mean - grid_mean) <= 3 * se

    def test_bad_config(self):
        with pytest.raises(ValueError):
            SamplerConfig(method="hmc")
        with pytest.raises(ValueError):
            SamplerConfig(m=0)
        with pytest.raises(ValueError):
            SamplerConfig(step_size=-1.0)


@pytest.mark.slow
class TestOracleAgreement:
    """Posterior means from Langevin vs the exact grid on random two-class histories.

    Any coordinate beyond three standard errors is re-tested once with an
    independent seed and four times as many chains; a real bias would not
    shrink in standard-error units.
    """

    def test_means(self):
        ws = WeightSet.ball(2, 1, 2.0)
        for i in range(20):
            rng = np.random.default_rng(100 + i)
            n = int(rng.integers(0, 51))
            X = rng.uniform(-1, 1, size=(n, 1))
            Y = np.eye(2)[rng.integers(0, 2, size=n)]
            spec = PosteriorSpec(ws, 1.0, X, Y)
            g = grid_samples(spec, 257)
            grid_mean = g.weights @ g.params

            def z_scores(m, seed):
                s = draw_samples(spec, SamplerConfig(m=m, seed=seed))
                se = s.params.std(axis=0) / math.sqrt(m)
                return np.abs(s.params.mean(axis=0) - grid_mean) / se

            z = z_scores(4096, i)
            if z.max() > 3:
                z = z_scores(16384, 10_000 + i)
            assert z.max() <= 3, (i, z)

    def test_softmax_predictions(self):
        ws = WeightSet.ball(2, 1, 2.0)
        spec = random_spec(ws, 20, 11)
        g = grid_samples(spec, 257)
        s = draw_samples(spec, SamplerConfig(m=4096, seed=2))
        for x in np.linspace(-1, 1, 5):
            gap = np.abs(g.mean_probs([x]) - s.mean_probs([x])).max()
            assert gap <= 0.02
