import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import ei_monte_carlo, gp_posterior_dense, matern32_dense
from tunekit.optimizer import XI, ei_closed_form, expected_improvement, gp_fit, gp_select_hypers, matern32
from tunekit.optimizer.gp import (
    LENGTHSCALES,
    NOISE_VARIANCES,
    SIGNAL_VARIANCES,
    GpFitError,
    cholesky_with_jitter,
    log_marginal_likelihood,
)


def random_instance(rng, n, d):
    X = rng.random((n, d))
    y = rng.normal(size=n) * rng.uniform(0.1, 10) + rng.uniform(-5, 5)
    return X, y


class TestKernel:
    def test_against_scalar_formula(self):
        rng = np.random.default_rng(0)
        A, B = rng.random((4, 3)), rng.random((5, 3))
        np.testing.assert_allclose(matern32(A, B, 0.3, 1.7), matern32_dense(A, B, 0.3, 1.7), rtol=1e-13)

    def test_zero_distance_is_signal_variance(self):
        assert matern32(np.zeros((1, 2)), np.zeros((1, 2)), 0.5, 2.0)[0, 0] == 2.0


class TestFit:
    def test_interpolates_single_datum(self):
        m = gp_fit([[0.5]], [2.0], 0.2, 1.0, 1e-10)
        mu, var = m.predict([[0.5]])
        assert abs(mu[0] - 2.0) < 1e-6
        assert var[0] < 1e-8 * 1.0

    def test_reverts_to_prior_far_away(self):
        X = np.array([[0.0], [0.02], [0.04]])
        y = np.array([1.0, 3.0, 2.0])
        m = gp_fit(X, y, 0.05, 2.0, 1e-6)
        mu, var = m.predict([[1.0]])
        assert mu[0] == pytest.approx(y.mean(), abs=1e-6)
        assert var[0] == pytest.approx(2.0, rel=1e-6)

    def test_dense_oracle_small(self):
        rng = np.random.default_rng(5)
        X, y = random_instance(rng, 5, 2)
        x = rng.random((20, 2))
        mu, var = gp_fit(X, y, 0.3, 1.0, 1e-6).predict(x)
        mu_o, var_o = gp_posterior_dense(X, y, x, 0.3, 1.0, 1e-6)
        assert np.max(np.abs(mu - mu_o)) < 1e-8
        assert np.max(np.abs(var - var_o)) < 1e-8

    def test_rejects_non_finite(self):
        with pytest.raises(GpFitError):
            gp_fit([[0.1], [0.2]], [1.0, np.nan], 0.2, 1.0, 1e-6)

    def test_rejects_bad_hypers(self):
        with pytest.raises(ValueError):
            gp_fit([[0.1]], [1.0], 0.0, 1.0, 1e-6)

    def test_duplicate_points_need_jitter_or_noise(self):
        X = np.array([[0.3], [0.3], [0.3]])
        m = gp_fit(X, [1.0, 1.0, 1.0], 0.2, 1.0, 1e-12)
        assert m.jitter <= 1e-4

    def test_jitter_gives_up(self):
        with pytest.raises(GpFitError):
            cholesky_with_jitter(np.array([[1.0, 0.0], [0.0, -1.0]]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 12), st.integers(1, 4))
    def test_variance_nonnegative(self, seed, n, d):
        rng = np.random.default_rng(seed)
        X, y = random_instance(rng, n, d)
        m = gp_fit(X, y, 0.4, 1.0, 1e-6)
        _, var = m.predict(np.vstack([X, rng.random((30, d))]))
        assert np.all(var >= 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 10), st.integers(1, 3))
    def test_more_data_never_raises_variance(self, seed, n, d):
        rng = np.random.default_rng(seed)
        X, y = random_instance(rng, n + 1, d)
        x = rng.random((25, d))
        hypers = (0.3, 1.0, 1e-4)
        _, before = gp_fit(X[:n], y[:n], *hypers).predict(x)
        _, after = gp_fit(X, y, *hypers).predict(x)
        assert np.all(after <= before + 1e-8)


class TestSelectHypers:
    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            gp_select_hypers([[0.5]], [1.0])

    def test_is_exhaustive_argmax(self):
        rng = np.random.default_rng(2)
        X, y = random_instance(rng, 12, 2)
        grid = list(itertools.product(LENGTHSCALES, SIGNAL_VARIANCES, NOISE_VARIANCES))
        scores = [log_marginal_likelihood(gp_fit(X, y, *h)) for h in grid]
        assert gp_select_hypers(X, y) == grid[int(np.argmax(scores))]

    def test_constant_targets_pick_smallest_noise(self):
        X = np.linspace(0, 1, 6)[:, None]
        assert gp_select_hypers(X, np.full(6, 3.0))[2] == 1e-6

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        X, y = random_instance(rng, 10, 2)
        assert gp_select_hypers(X, y) == gp_select_hypers(X, y + 1000.0)

    def test_recovers_lengthscale(self):
        """Noiseless draws from a lengthscale-0.2 prior select a neighbouring grid lengthscale.

        A draw whose empirical spread is far below the prior's gets inflated by
        standardization beyond the largest signal variance on the grid, and the
        likelihood then prefers a shorter lengthscale.  That happens for about 1
        draw in 100, so the check is a rate over 100 draws.
        """
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            X = rng.random((30, 1))
            K = matern32(X, X, 0.2, 1.0) + 1e-10 * np.eye(30)
            y = np.linalg.cholesky(K) @ rng.standard_normal(30)
            hits += gp_select_hypers(X, y)[0] in (0.1, 0.2, 0.4)
        assert hits >= 95


class TestExpectedImprovement:
    def test_no_uncertainty_no_gain(self):
        assert ei_closed_form(1.0, 0.0, 0.5) == 0.0
        assert ei_closed_form(0.5, 0.0, 0.5) == 0.0

    def test_no_uncertainty_with_gain(self):
        assert ei_closed_form(0.0, 0.0, 1.0) == pytest.approx(1.0 - XI)

    def test_z_zero(self):
        assert ei_closed_form(1.0 - XI, 1.0, 1.0) == pytest.approx(0.3989422804014327, abs=1e-15)

    def test_monte_carlo(self):
        rng = np.random.default_rng(0)
        mc = ei_monte_carlo(0.0, 0.5, 0.2, XI, 1_000_000, rng)
        assert abs(float(ei_closed_form(0.0, 0.5, 0.2)) - mc) < 1e-3

    @given(st.floats(-100, 100), st.floats(0, 100), st.floats(-100, 100))
    def test_nonnegative(self, mu, sigma, f_best):
        assert ei_closed_form(mu, sigma, f_best) >= 0

    def test_vanishes_at_interpolated_observations(self):
        rng = np.random.default_rng(4)
        X, y = random_instance(rng, 8, 2)
        m = gp_fit(X, y, 0.3, 1.0, 1e-10)
        ei = expected_improvement(m, X, float(np.min(y)))
        assert np.all(ei < 1e-6)

    def test_standardized_units_match_manual(self):
        rng = np.random.default_rng(6)
        X, y = random_instance(rng, 7, 2)
        m = gp_fit(X, y, 0.3, 1.0, 1e-6)
        x = rng.random((10, 2))
        mu, var = m.predict(x)
        manual = ei_closed_form((mu - m.y_mean) / m.y_scale, np.sqrt(var), (y.min() - m.y_mean) / m.y_scale)
        np.testing.assert_allclose(expected_improvement(m, x, float(y.min())), manual, rtol=1e-10, atol=1e-14)
