import numpy as np
import pytest
from scipy import stats

from anchoropt.benchmarks import FORRESTER_ARGMAX, forrester
from anchoropt.space import HyperParam, HyperParamSpace, builtin_space
from anchoropt.surrogate import (
    BoConfig,
    RfConfig,
    _matern52,
    expected_improvement,
    gp_fit,
    gp_predict,
    propose_next,
    rf_fit,
    rf_predict,
    run_sequential_bo,
)

unit_1d = HyperParamSpace((HyperParam("x", 0.0, 1.0),))


def gp_oracle(X, y, ls, sf2, noise, Xq):
    """Dense linear algebra posterior, independent of the Cholesky path."""
    K = _matern52(X, X, ls, sf2) + noise * np.eye(len(X))
    K_inv = np.linalg.inv(K)
    k_star = _matern52(X, Xq, ls, sf2)
    mu = k_star.T @ K_inv @ y
    var = sf2 - np.sum(k_star * (K_inv @ k_star), axis=0)
    return mu, var


class TestGp:
    def test_two_point_interpolation(self):
        X = np.array([[0.2], [0.8]])
        y = np.array([1.0, -1.0])
        model = gp_fit(X, y, noise=1e-10, seed=0)
        mu, _ = model.predict(X)
        np.testing.assert_allclose(mu, y, atol=1e-6)

    def test_constant_targets(self):
        X = np.random.default_rng(0).uniform(0, 1, (6, 2))
        model = gp_fit(X, np.full(6, 2.5), seed=0)
        mu, _ = model.predict(np.random.default_rng(1).uniform(0, 1, (10, 2)))
        np.testing.assert_allclose(mu, 2.5, atol=1e-6)

    def test_1d_quadratic_fit_quality(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(0, 1, (20, 1))
        y = (X[:, 0] - 0.4) ** 2
        model = gp_fit(X, y, seed=0)
        held_out = np.linspace(0.05, 0.95, 15)[:, None]
        mu, _ = model.predict(held_out)
        assert np.abs(mu - (held_out[:, 0] - 0.4) ** 2).max() < 0.05

    def test_predict_at_training_point(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(0, 1, (8, 3))
        y = np.sin(X.sum(axis=1))
        model = gp_fit(X, y, noise=1e-10, seed=0)
        mu, var = gp_predict(model, X[4])
        assert mu == pytest.approx(y[4], abs=1e-6)
        assert var < 1e-6

    def test_prior_reversion_far_from_data(self):
        X = np.array([[0.5, 0.5]])
        X = np.vstack([X, [[0.52, 0.5]]])
        model = gp_fit(X, np.array([0.3, 0.5]), noise=1e-8, seed=0)
        far = X[0] + 20.0 * model.lengthscales.max()
        _, var = gp_predict(model, far)
        assert var == pytest.approx(model.prior_variance, rel=0.01)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            X = rng.uniform(0, 1, (5, 3))
            y = rng.normal(size=5)
            model = gp_fit(X, y, seed=int(rng.integers(10_000)))
            Xq = rng.uniform(0, 1, (6, 3))
            mu, var = model.predict(Xq)
            y_std = (y - model.y_mean) / model.y_std
            mu_o, var_o = gp_oracle(
                X, y_std, model.lengthscales, model.signal_var, model.noise_var, Xq
            )
            np.testing.assert_allclose(mu, model.y_mean + model.y_std * mu_o, atol=1e-8)
            np.testing.assert_allclose(var, np.maximum(var_o, 0) * model.y_std**2, atol=1e-8)

    def test_posterior_variance_bounded_by_prior(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(0, 1, (12, 2))
        model = gp_fit(X, rng.normal(size=12), seed=1)
        _, var = model.predict(rng.uniform(-1, 2, (200, 2)))
        assert np.all(var <= model.prior_variance + 1e-8)

    def test_duplicate_conflicting_rows_absorbed_by_noise(self):
        X = np.array([[0.5], [0.5], [0.9]])
        y = np.array([0.0, 1.0, 0.4])
        model = gp_fit(X, y, seed=0)
        mu, _ = model.predict(np.array([[0.5]]))
        assert 0.0 < mu[0] < 1.0

    def test_reproducible_under_seed(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(0, 1, (10, 2))
        y = rng.normal(size=10)
        a = gp_fit(X, y, seed=4)
        b = gp_fit(X, y, seed=4)
        np.testing.assert_array_equal(a.lengthscales, b.lengthscales)
        assert a.noise_var == b.noise_var

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            gp_fit(np.array([[0.5]]), np.array([1.0]))


class TestExpectedImprovement:
    def test_zero_variance_no_improvement(self):
        assert expected_improvement(0.5, 0.0, best=0.5, xi=0.0) == 0.0
        assert expected_improvement(0.3, 0.0, best=0.5, xi=0.0) == 0.0

    def test_zero_variance_positive_gap(self):
        assert expected_improvement(0.7, 0.0, best=0.5, xi=0.0) == pytest.approx(0.2)

    def test_at_incumbent_unit_variance(self):
        assert expected_improvement(0.0, 1.0, best=0.0, xi=0.0) == pytest.approx(
            stats.norm.pdf(0.0), abs=1e-12
        )

    def test_monotone_in_mu(self):
        mus = np.linspace(-3, 3, 200)
        ei = expected_improvement(mus, np.full_like(mus, 0.7), best=0.3, xi=0.1)
        assert np.all(np.diff(ei) >= 0)

    def test_nonnegative_everywhere(self):
        rng = np.random.default_rng(0)
        ei = expected_improvement(
            rng.normal(size=500), rng.uniform(0, 4, 500), best=0.2, xi=0.01
        )
        assert np.all(ei >= 0)

    def test_vanishes_as_variance_shrinks_below_incumbent(self):
        ei = expected_improvement(0.0, np.array([1e-2, 1e-6, 1e-12, 0.0]), best=1.0)
        assert np.all(np.diff(ei) <= 1e-12)
        assert ei[-1] == 0.0

    def test_monte_carlo_agreement(self):
        rng = np.random.default_rng(123)
        z = rng.standard_normal(500_000)
        z = np.concatenate([z, -z])  # antithetic pairs
        worst = 0.0
        for mu in (-1.0, -0.2, 0.0, 0.4, 1.5):
            for var in (0.0, 0.04, 0.25, 1.0):
                for best in (-0.5, 0.0, 0.8):
                    closed = expected_improvement(mu, var, best)
                    mc = np.maximum(mu + np.sqrt(var) * z - best, 0.0).mean()
                    worst = max(worst, abs(closed - mc))
        assert worst < 1e-3

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            expected_improvement(0.0, -1.0, 0.0)


class TestRandomForest:
    def test_constant_targets(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 1, (20, 3))
        model = rf_fit(X, np.full(20, 3.3), RfConfig(n_trees=5, seed=1))
        mu, var = model.predict(X[:4])
        np.testing.assert_allclose(mu, 3.3)
        assert np.all(var <= 1e-12)

    def test_pure_leaves_reproduce_targets(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 1, (12, 2))
        y = rng.normal(size=12)
        model = rf_fit(
            X, y, RfConfig(n_trees=4, bootstrap=False, max_features=1.0, seed=0)
        )
        mu, _ = model.predict(X)
        np.testing.assert_allclose(mu, y, atol=1e-6)

    def test_bootstrapped_point_in_all_samples(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(0, 1, (6, 2))
        y = rng.normal(size=6)
        model = rf_fit(X, y, RfConfig(n_trees=3, max_features=1.0, seed=5))
        everywhere = set(range(6))
        for idx in model.sample_indices:
            everywhere &= set(idx.tolist())
        assert everywhere, "seed chosen so at least one point appears in every bootstrap"
        for i in everywhere:
            mu, _ = model.predict(X[i][None, :])
            assert mu[0] == pytest.approx(y[i], abs=1e-6)

    def test_predictions_in_target_hull(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(0, 1, (40, 4))
        y = rng.normal(size=40)
        model = rf_fit(X, y, RfConfig(seed=7))
        mu, var = model.predict(rng.uniform(-0.5, 1.5, (100, 4)))
        assert np.all(mu >= y.min() - 1e-9) and np.all(mu <= y.max() + 1e-9)
        assert np.all(var >= 0)

    def test_mean_invariant_to_tree_order(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(0, 1, (25, 3))
        y = rng.normal(size=25)
        model = rf_fit(X, y, RfConfig(seed=2))
        Xq = rng.uniform(0, 1, (10, 3))
        mu, var = model.predict(Xq)
        model.trees = model.trees[::-1]
        mu_r, var_r = model.predict(Xq)
        np.testing.assert_array_equal(mu, mu_r)
        np.testing.assert_array_equal(var, var_r)

    def test_bit_reproducible(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(0, 1, (30, 3))
        y = rng.normal(size=30)
        Xq = rng.uniform(0, 1, (5, 3))
        a = rf_predict(rf_fit(X, y, RfConfig(seed=9)), Xq)
        b = rf_predict(rf_fit(X, y, RfConfig(seed=9)), Xq)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_single_tree_rejected(self):
        with pytest.raises(ValueError):
            RfConfig(n_trees=1)


class TestProposeNext:
    def _fitted_1d(self):
        X = np.array([[0.05], [0.1], [0.2], [0.9], [0.95]])
        y = np.array([0.1, 0.2, 0.15, 0.3, 0.2])
        return gp_fit(X, y, noise=1e-6, seed=0)

    def test_in_range(self):
        model = self._fitted_1d()
        x = propose_next(model, unit_1d, 0.3, BoConfig(budget=10), np.random.default_rng(0))
        np.testing.assert_array_equal(unit_1d.clip(x), x)

    def test_deterministic(self):
        model = self._fitted_1d()
        cfg = BoConfig(budget=10)
        a = propose_next(model, unit_1d, 0.3, cfg, np.random.default_rng(5))
        b = propose_next(model, unit_1d, 0.3, cfg, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_lands_in_top_decile_of_grid_ei(self):
        model = self._fitted_1d()
        cfg = BoConfig(budget=10, acquisition_samples=4096)
        x = propose_next(model, unit_1d, 0.3, cfg, np.random.default_rng(1))
        grid = np.linspace(1e-6, 1.0, 10_000)[:, None]
        mu, var = model.predict(grid)
        ei_grid = expected_improvement(mu, var, 0.3, cfg.xi)
        mu_x, var_x = model.predict(x[None, :])
        ei_x = expected_improvement(mu_x, var_x, 0.3, cfg.xi)[0]
        assert ei_x >= np.quantile(ei_grid, 0.9)


class TestSequentialBo:
    def test_history_length_and_monotone_best(self):
        cfg = BoConfig(budget=18, initial_design_size=6, seed=0)
        hist = run_sequential_bo(lambda v: forrester(v[0]), unit_1d, cfg, "gp")
        assert len(hist) == 18
        assert [t.trial_id for t in hist] == list(range(18))
        best = -np.inf
        for t in hist:
            best = max(best, t.fitness)
            running = max(x.fitness for x in hist[: t.trial_id + 1])
            assert running == best

    def test_deterministic_end_to_end(self):
        cfg = BoConfig(budget=14, initial_design_size=5, seed=3)
        a = run_sequential_bo(lambda v: forrester(v[0]), unit_1d, cfg, "gp")
        b = run_sequential_bo(lambda v: forrester(v[0]), unit_1d, cfg, "gp")
        assert [t.params_scaled for t in a] == [t.params_scaled for t in b]
        assert [t.fitness for t in a] == [t.fitness for t in b]

    def test_objective_failures_are_skipped_not_fatal(self):
        calls = {"n": 0}

        def flaky(v):
            calls["n"] += 1
            if calls["n"] % 4 == 0:
                raise RuntimeError("training crashed")
            return forrester(v[0])

        cfg = BoConfig(budget=16, initial_design_size=6, seed=1)
        hist = run_sequential_bo(flaky, unit_1d, cfg, "gp")
        assert len(hist) == 16
        failed = [t for t in hist if t.status == "failed"]
        assert failed and all(np.isnan(t.fitness) for t in failed)

    def test_rf_surrogate_path(self):
        cfg = BoConfig(budget=20, initial_design_size=8, seed=2)
        hist = run_sequential_bo(
            lambda v: forrester(v[0]), unit_1d, cfg, "rf", rf_config=RfConfig(n_trees=10)
        )
        assert len(hist) == 20
        assert max(t.fitness for t in hist) > 0.0

    def test_gp_ei_locates_forrester_optimum(self):
        passed = 0
        for seed in range(10):
            cfg = BoConfig(budget=30, initial_design_size=8, seed=seed)
            hist = run_sequential_bo(lambda v: forrester(v[0]), unit_1d, cfg, "gp")
            best = max(hist, key=lambda t: t.fitness)
            passed += abs(best.params_scaled[0] - FORRESTER_ARGMAX) < 0.01
        assert passed >= 9

    def test_unknown_surrogate(self):
        with pytest.raises(ValueError):
            run_sequential_bo(lambda v: 0.0, unit_1d, BoConfig(budget=5), "tpe")


class TestBoConfig:
    def test_design_size_default(self):
        assert BoConfig(budget=75).resolved_design_size(7) == 16
        assert BoConfig(budget=75).resolved_design_size(1) == 10

    def test_design_must_fit_budget(self):
        with pytest.raises(ValueError):
            BoConfig(budget=10, initial_design_size=10)

    def test_space_bounds_respected_by_design(self):
        from anchoropt.surrogate import latin_hypercube

        space = builtin_space("ssd")
        pts = latin_hypercube(space, 50, 0)
        assert np.all(pts > 0.0) and np.all(pts <= 1.06)
