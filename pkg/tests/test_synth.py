import math

import numpy as np
import pytest

from pgdglm.synth import (
    BenchDesign,
    gen_binom_series,
    gen_covariates,
    gen_flu_standin,
    gen_negbin_series,
    read_dataset,
    write_dataset,
)


class TestCovariates:
    def test_independent(self, rng):
        x = gen_covariates(BenchDesign(T=10_000, corr_low=0.0), rng)
        assert abs(np.corrcoef(x.T)[0, 1]) < 0.02

    def test_high_correlation(self, rng):
        x = gen_covariates(BenchDesign(T=10_000, correlation="high"), rng)
        assert np.corrcoef(x.T)[0, 1] == pytest.approx(0.9, abs=0.02)

    def test_reproducible(self):
        d = BenchDesign(T=20)
        a = gen_covariates(d, np.random.default_rng(1))
        b = gen_covariates(d, np.random.default_rng(1))
        np.testing.assert_array_equal(a, b)


class TestBinomial:
    def test_symmetric_logit(self, rng):
        d = BenchDesign(T=20_000, w_diag=0.0, phi_diag=0.0, stationary_init=False, n_trials=1)
        s, path, _ = gen_binom_series(d, rng)
        assert np.all(path.betas == 0.0)
        assert s.y.mean() == pytest.approx(0.5, abs=0.02)

    def test_binary(self, rng):
        s, _, _ = gen_binom_series(BenchDesign(), rng)
        assert set(np.unique(s.y)) <= {0.0, 1.0}

    def test_saturation(self, rng):
        d = BenchDesign(n_trials=20, alpha=8.0, w_diag=0.0, stationary_init=False)
        s, _, _ = gen_binom_series(d, rng)
        assert s.y.mean() > 19.5

    def test_missing_blocks(self, rng):
        s, _, _ = gen_binom_series(BenchDesign(T=30, missing=[[5, 9]]), rng)
        assert np.flatnonzero(~s.observed).tolist() == [4, 5, 6, 7, 8]


class TestNegBin:
    @pytest.mark.parametrize("level", [10.0, 100.0])
    def test_mean_level(self, rng, level):
        d = BenchDesign(family="neg-binom", T=20_000, alpha=math.log(level), w_diag=0.0,
                        stationary_init=False)
        s, _, _, _ = gen_negbin_series(d, rng)
        se = math.sqrt((level + level**2 / 4.0) / s.T)
        assert abs(s.y.mean() - level) < 5 * se

    def test_poisson_limit(self, rng):
        d = BenchDesign(family="neg-binom", T=50_000, alpha=math.log(10), w_diag=0.0,
                        stationary_init=False, dispersion=1e4)
        s, _, _, _ = gen_negbin_series(d, rng)
        assert s.y.var() / s.y.mean() == pytest.approx(1.0, abs=0.03)

    def test_family_mismatch(self, rng):
        with pytest.raises(ValueError):
            gen_negbin_series(BenchDesign(), rng)


class TestFlu:
    def test_shape(self, rng):
        s, lam, d = gen_flu_standin(rng)
        assert s.T == 208
        # weeks 21..41 of each year are blank
        assert (~s.observed).sum() == 4 * 21
        assert s.observed[19] and not s.observed[20] and not s.observed[40] and s.observed[41]
        assert lam.shape == (208,)


class TestRoundTrip:
    def test_binomial(self, rng, tmp_path):
        s, _, _ = gen_binom_series(BenchDesign(n_trials=20, missing=[[3, 4]]), rng)
        write_dataset(tmp_path / "d.csv", s)
        back = read_dataset(tmp_path / "d.csv", "binom-logit")
        np.testing.assert_array_equal(back.observed, s.observed)
        np.testing.assert_array_equal(back.y[s.observed], s.y[s.observed])
        np.testing.assert_array_equal(back.x, s.x)
        np.testing.assert_array_equal(back.n, s.n)

    def test_negbin(self, rng, tmp_path):
        s, _, _, _ = gen_negbin_series(BenchDesign(family="neg-binom", alpha=2.0), rng)
        write_dataset(tmp_path / "d.csv", s)
        back = read_dataset(tmp_path / "d.csv", "neg-binom")
        np.testing.assert_array_equal(back.y, s.y)
        np.testing.assert_array_equal(back.x, s.x)


class TestDesign:
    def test_validation(self):
        with pytest.raises(ValueError):
            BenchDesign(phi_diag=1.0)
        with pytest.raises(ValueError):
            BenchDesign(family="poisson")
