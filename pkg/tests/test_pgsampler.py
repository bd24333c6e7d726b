import math

import numpy as np
import pytest
from scipy import integrate, stats

from pgdglm.errors import PGSamplerError
from pgdglm.pgsampler import (
    PGParams,
    pg_density_series,
    pg_mean,
    pg_variance,
    sample_pg,
    sample_pg1,
    sample_pg_array,
)


def _draws(b, psi, n, seed=0):
    rng = np.random.default_rng(seed)
    return sample_pg_array(np.full(n, b), np.full(n, psi), rng)


def _within(x, mean, var, k=5.0):
    return abs(x.mean() - mean) < k * math.sqrt(var / x.size)


class TestMoments:
    def test_mean_at_zero(self):
        assert pg_mean(1, 0) == pytest.approx(0.25, abs=1e-15)

    def test_mean_formula(self):
        assert pg_mean(2, 1) == pytest.approx(math.tanh(0.5), rel=1e-12)
        assert pg_mean(1, 2) == pytest.approx(0.25 * math.tanh(1.0), rel=1e-12)

    def test_mean_non_integer_b(self):
        # (3.5 / 3.4) * tanh(0.85)
        assert pg_mean(3.5, 1.7) == pytest.approx(0.711395, abs=1e-6)

    def test_variance_at_zero(self):
        assert pg_variance(1, 0) == pytest.approx(1 / 24, rel=1e-12)

    def test_variance_continuous_through_series_switch(self):
        c = np.array([0.0999999, 0.1000001])
        v = pg_variance(1.0, c)
        assert abs(v[0] - v[1]) < 1e-9

    def test_mean_is_log_laplace_derivative(self):
        # E[w] = -d/dt log E[exp(-w t)] at t = 0, with E[exp(-w t)] = cosh^b(c/2) / cosh^b(sqrt(c^2 + 2t)/2)
        b, c, h = 2.5, 1.3, 1e-6

        def log_lt(t):
            return b * (math.log(math.cosh(c / 2)) - math.log(math.cosh(math.sqrt(c * c + 2 * t) / 2)))

        deriv = -(log_lt(h) - log_lt(-h)) / (2 * h)
        assert pg_mean(b, c) == pytest.approx(deriv, rel=1e-6)

    def test_vectorized_and_symmetric(self):
        c = np.linspace(-5, 5, 11)
        np.testing.assert_allclose(pg_mean(1.0, c), pg_mean(1.0, -c))
        np.testing.assert_allclose(pg_variance(3.0, c), pg_variance(3.0, -c))
        assert pg_mean(1.0, c).shape == (11,)


class TestDensity:
    def test_integrates_to_one(self):
        val, _ = integrate.quad(lambda x: pg_density_series(x, 1.0, 0.0), 0, 10, limit=200)
        assert val == pytest.approx(1.0, abs=1e-4)

    def test_tilt_symmetry(self):
        x = np.linspace(0.01, 2, 50)
        np.testing.assert_allclose(pg_density_series(x, 1.5, 2.0), pg_density_series(x, 1.5, -2.0))

    def test_first_moment_matches_mean(self):
        val, _ = integrate.quad(lambda x: x * pg_density_series(x, 1.0, 2.0), 0, 10, limit=200)
        assert val == pytest.approx(pg_mean(1, 2), abs=1e-3)

    @pytest.mark.parametrize("b,c", [(2.0, 0.5), (3.5, 1.7)])
    def test_moments_by_quadrature(self, b, c):
        m, _ = integrate.quad(lambda x: x * pg_density_series(x, b, c), 0, 20, limit=300)
        m2, _ = integrate.quad(lambda x: x * x * pg_density_series(x, b, c), 0, 20, limit=300)
        assert m == pytest.approx(pg_mean(b, c), rel=1e-6)
        assert m2 - m * m == pytest.approx(pg_variance(b, c), rel=1e-5)


class TestPG1:
    def test_mean_and_variance_at_zero(self):
        x = _draws(1.0, 0.0, 200_000)
        assert _within(x, 0.25, 1 / 24)
        assert x.var() == pytest.approx(1 / 24, rel=0.03)

    def test_mean_at_two(self):
        x = _draws(1.0, 2.0, 200_000)
        assert _within(x, 0.25 * math.tanh(1.0), pg_variance(1, 2))

    def test_sign_symmetry(self):
        a = _draws(1.0, -3.0, 20_000, seed=1)
        b = _draws(1.0, 3.0, 20_000, seed=2)
        assert stats.ks_2samp(a, b).pvalue > 1e-3

    def test_positive(self):
        x = _draws(1.0, 40.0, 10_000)
        assert np.all(x > 0)

    def test_distribution_matches_density(self):
        x = _draws(1.0, 1.0, 50_000, seed=5)
        grid = np.linspace(1e-4, 3.0, 4000)
        pdf = pg_density_series(grid, 1.0, 1.0)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
        ks = stats.kstest(x, lambda v: np.interp(v, grid, cdf))
        assert ks.pvalue > 1e-3

    def test_scalar_api_deterministic(self):
        a = [sample_pg1(0.7, np.random.default_rng(3)) for _ in range(2)]
        assert a[0] == a[1]

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            sample_pg1(float("nan"), np.random.default_rng(0))


class TestGeneralB:
    def test_integer_sum(self):
        x = _draws(3.0, 0.0, 100_000)
        assert _within(x, 0.75, pg_variance(3, 0))

    def test_b_one_matches_pg1(self):
        assert sample_pg((1.0, 0.0), np.random.default_rng(9)) == sample_pg1(0.0, np.random.default_rng(9))

    def test_non_integer_b(self):
        x = _draws(3.5, 1.7, 100_000)
        assert _within(x, pg_mean(3.5, 1.7), pg_variance(3.5, 1.7))

    def test_large_integer_uses_series(self):
        x = _draws(80.0, 2.0, 20_000)
        assert _within(x, pg_mean(80, 2), pg_variance(80, 2))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            PGParams(0.0, 1.0)
        with pytest.raises(ValueError):
            PGParams(1.0, float("inf"))

    def test_mask_leaves_entries(self, rng):
        out = np.full(5, -1.0)
        mask = np.array([True, False, True, False, True])
        sample_pg_array(np.ones(5), np.zeros(5), rng, out=out, mask=mask)
        assert np.all(out[~mask] == -1.0)
        assert np.all(out[mask] > 0)

    def test_broadcasting(self, rng):
        x = sample_pg_array(2.0, np.zeros((3, 4)), rng)
        assert x.shape == (3, 4)

    def test_error_type(self):
        assert issubclass(PGSamplerError, RuntimeError)
