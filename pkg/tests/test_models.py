import math

import numpy as np
import pytest

from pgdglm.errors import DataError
from pgdglm.ffbs import StateSpaceSpec, simulate_dlm
from pgdglm.models import (
    BinomLogitSeries,
    ChainConfig,
    HyperPriorSpec,
    NegBinSeries,
    alpha_conditional,
    augment,
    binom_draw_omegas,
    binom_kappa,
    binom_pseudo_obs,
    dispersion_log_accept_ratio,
    draw_alpha,
    draw_ar_hyperparams,
    draw_dispersion,
    gibbs_step,
    init_state,
    nb_draw_omegas,
    nb_pseudo_obs,
    posterior_predictive,
    run_chain,
)
from pgdglm.pgsampler import pg_mean, pg_variance


def _binom(y, n, p=1, observed=None):
    y = np.asarray(y, dtype=float)
    return BinomLogitSeries(y=y, n=n, x=np.ones((y.size, p)), observed=observed)


class TestSeries:
    def test_nan_means_missing(self):
        s = _binom([1, np.nan, 0], 1)
        np.testing.assert_array_equal(s.observed, [True, False, True])

    def test_y_above_n_names_step(self):
        with pytest.raises(DataError, match="step 1"):
            _binom([1, 25], 20)

    def test_negative_counts(self):
        with pytest.raises(DataError):
            NegBinSeries(y=[1.0, -2.0], x=np.ones((2, 1)))

    def test_fractional_trials(self):
        with pytest.raises(DataError):
            _binom([0, 1], 1.5)


class TestBinomial:
    def test_kappa(self):
        s = _binom([1, 10, 0], [1, 20, 20])
        np.testing.assert_array_equal(binom_kappa(s), [0.5, 0.0, -10.0])

    def test_pseudo_data(self):
        s = _binom([1], 1)
        z = binom_pseudo_obs(s, np.array([0.25]), 0.0)
        assert z.z[0] == 2.0
        assert z.precision[0] == 0.25
        assert binom_pseudo_obs(s, np.array([0.25]), 1.0).z[0] == 1.0

    def test_omegas_at_zero_log_odds(self, rng):
        s = _binom(np.zeros(20_000), 1)
        w = binom_draw_omegas(s, np.zeros((s.T, 1)), 0.0, rng)
        assert abs(w.mean() - 0.25) < 5 * math.sqrt(pg_variance(1, 0) / s.T)

    def test_omegas_twenty_trials(self, rng):
        s = _binom(np.full(5_000, 10.0), 20)
        w = binom_draw_omegas(s, np.zeros((s.T, 1)), 0.0, rng)
        assert abs(w.mean() - 5.0) < 5 * math.sqrt(pg_variance(20, 0) / s.T)

    def test_unobserved_omega_untouched(self, rng):
        s = _binom([1, np.nan, 0], 1)
        out = np.array([0.0, -7.0, 0.0])
        binom_draw_omegas(s, np.zeros((3, 1)), 0.0, rng, out=out)
        assert out[1] == -7.0

    def test_tiny_omega_refused(self):
        s = _binom([1], 1)
        with pytest.raises(FloatingPointError):
            binom_pseudo_obs(s, np.array([1e-320]), 0.0)


class TestNegBin:
    def test_exponents(self):
        s = NegBinSeries(y=[0.0, 9.0], x=np.ones((2, 1)))
        state = init_state(s, StateSpaceSpec.ar1(1), alpha=0.0, dispersion=1.0)
        aug = augment(s, state)
        assert aug[0].b == 1.0 and aug[0].psi == 0.0
        assert aug[1].b == 10.0 and aug[1].kappa == 4.0

    def test_zero_counts_unit_dispersion(self, rng):
        s = NegBinSeries(y=np.zeros(20_000), x=np.ones((20_000, 1)))
        w = nb_draw_omegas(s, np.zeros((s.T, 1)), 0.0, 1.0, rng)
        assert abs(w.mean() - 0.25) < 5 * math.sqrt(pg_variance(1, 0) / s.T)

    def test_fractional_dispersion(self, rng):
        s = NegBinSeries(y=np.full(20_000, 2.0), x=np.ones((20_000, 1)))
        w = nb_draw_omegas(s, np.zeros((s.T, 1)), 0.0, 1.5, rng)
        b, c = 3.5, -math.log(1.5)
        assert abs(w.mean() - pg_mean(b, c)) < 5 * math.sqrt(pg_variance(b, c) / s.T)

    def test_pseudo_data(self):
        s = NegBinSeries(y=[5.0, 15.0], x=np.ones((2, 1)))
        z = nb_pseudo_obs(s, np.array([1.0, 1.0]), 0.0, 5.0)
        assert z.z[0] == pytest.approx(math.log(5.0))
        assert z.z[1] == pytest.approx(5.0 + math.log(5.0))
        assert nb_pseudo_obs(s, np.array([1.0, 1.0]), 2.0, 5.0).z[0] == pytest.approx(math.log(5) - 2)


class TestAlpha:
    def test_one_point_flat_prior(self):
        mean, var = alpha_conditional(np.array([1.7]), np.array([2.0]), np.array([True]), 0.0, 1e6)
        assert mean == pytest.approx(1.7, rel=1e-5)
        assert var == pytest.approx(0.5, rel=1e-5)

    def test_dogmatic_prior(self, rng):
        a = draw_alpha(np.array([5.0]), np.array([1.0]), np.array([True]), 0.3, 1e-12, rng)
        assert a == pytest.approx(0.3, abs=1e-5)

    def test_dense_oracle(self):
        rng = np.random.default_rng(4)
        r, w = rng.normal(size=5), rng.uniform(0.5, 2, 5)
        obs = np.array([True, True, False, True, True])
        # stack prior and data as a weighted regression on a constant
        prec = 1 / 4.0 + w[obs].sum()
        mean = (1.0 / 4.0 + w[obs] @ r[obs]) / prec
        m, v = alpha_conditional(r, w, obs, 1.0, 4.0)
        assert m == pytest.approx(mean, rel=1e-10)
        assert v == pytest.approx(1 / prec, rel=1e-10)


class TestARHyperparams:
    def test_recovers_truth(self):
        rng = np.random.default_rng(8)
        truth = StateSpaceSpec.ar1(1, phi=0.95, w=0.01)
        path = simulate_dlm(truth, 2000, rng).betas
        priors = HyperPriorSpec.with_ar()
        spec = StateSpaceSpec.ar1(1, phi=0.5, w=0.1)
        draws = []
        for k in range(1500):
            spec = draw_ar_hyperparams(path, spec, priors, rng)
            if k >= 300:
                draws.append((spec.mu[0], spec.phi[0, 0], spec.w[0, 0]))
        mu, phi, w = np.mean(draws, axis=0)
        assert abs(phi - 0.95) < 0.03
        assert abs(w - 0.01) < 0.03
        assert abs(mu) < 0.5

    def test_constant_path_w_near_prior_floor(self, rng):
        priors = HyperPriorSpec(estimate_w=True, w_shape=2.0, w_scale=0.01)
        spec = StateSpaceSpec(mu=0.0, phi=1.0, w=0.1, m0=0.0, c0=1.0)
        ws = [draw_ar_hyperparams(np.zeros((500, 1)), spec, priors, rng).w[0, 0] for _ in range(200)]
        # posterior IG(2 + 249.5, 0.01) has mean about 4e-5
        assert np.mean(ws) < 1e-4

    def test_fixed_when_not_estimated(self, rng):
        spec = StateSpaceSpec.ar1(2)
        assert draw_ar_hyperparams(np.zeros((10, 2)), spec, HyperPriorSpec(), rng) is spec

    def test_reproducible(self):
        path = np.cumsum(np.random.default_rng(0).normal(size=(50, 1)), axis=0) * 0.1
        spec = StateSpaceSpec.ar1(1)
        a = draw_ar_hyperparams(path, spec, HyperPriorSpec.with_ar(), np.random.default_rng(2))
        b = draw_ar_hyperparams(path, spec, HyperPriorSpec.with_ar(), np.random.default_rng(2))
        np.testing.assert_array_equal(a.phi, b.phi)


class TestDispersion:
    def _series(self):
        return NegBinSeries(y=[3.0, 0.0, 12.0, 5.0], x=np.ones((4, 1)))

    def test_ratio_is_zero_at_current(self):
        s = self._series()
        assert dispersion_log_accept_ratio(s, np.full(4, 1.5), 2.5, 2.5, HyperPriorSpec()) == 0.0

    def test_zero_step_stays(self, rng):
        s = self._series()
        d, _ = draw_dispersion(s, np.zeros((4, 1)), 1.0, 2.5, HyperPriorSpec(), rng, step=0.0)
        assert d == 2.5

    def test_lognormal_prior_target(self):
        s = self._series()
        pri = HyperPriorSpec(dispersion_prior="lognormal", dispersion_logmean=0.0, dispersion_logsd=1.0)
        flat = HyperPriorSpec()
        lam = np.full(4, 1.0)
        diff = (dispersion_log_accept_ratio(s, lam, 1.0, 2.0, pri)
                - dispersion_log_accept_ratio(s, lam, 1.0, 2.0, flat))
        # lognormal log-scale density minus the flat prior's log-Jacobian
        assert diff == pytest.approx(-0.5 * math.log(2.0) ** 2 - math.log(2.0), rel=1e-12)


class TestChain:
    def _data(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(30, 2))
        return BinomLogitSeries(y=rng.integers(0, 6, 30).astype(float), n=5, x=x)

    def test_stored_draws(self):
        assert ChainConfig(12_000, 2_000).n_stored == 10_000
        assert ChainConfig(12_000, 2_000, thin=10).n_stored == 1_000

    def test_gibbs_step_deterministic(self):
        data = self._data()
        spec = StateSpaceSpec.ar1(2)
        s0 = init_state(data, spec)
        a = gibbs_step(gibbs_step(s0, data, HyperPriorSpec.with_ar(), np.random.default_rng(3)),
                       data, HyperPriorSpec.with_ar(), np.random.default_rng(4))
        b = gibbs_step(gibbs_step(s0, data, HyperPriorSpec.with_ar(), np.random.default_rng(3)),
                       data, HyperPriorSpec.with_ar(), np.random.default_rng(4))
        np.testing.assert_array_equal(a.path, b.path)
        assert a.alpha == b.alpha

    def test_run_chain_identical_and_shaped(self):
        data = self._data()
        cfg = ChainConfig(300, 100, thin=2)
        a = run_chain(data, HyperPriorSpec(), cfg, StateSpaceSpec.ar1(2), rng=np.random.default_rng(0))
        b = run_chain(data, HyperPriorSpec(), cfg, StateSpaceSpec.ar1(2), rng=np.random.default_rng(0))
        assert a.betas.shape == (100, 30, 2)
        assert a.betas.tobytes() == b.betas.tobytes()
        assert a.sampling_seconds > 0 and a.burnin_seconds > 0

    def test_dispersion_adapts_and_moves(self):
        rng = np.random.default_rng(2)
        y = rng.negative_binomial(4, 4 / (4 + 10), size=200).astype(float)
        data = NegBinSeries(y=y, x=np.ones((200, 1)))
        spec = StateSpaceSpec.ar1(1, phi=0.9, w=0.001)
        out = run_chain(data, HyperPriorSpec(), ChainConfig(600, 300), spec,
                        alpha=math.log(10), dispersion=1.0, rng=rng)
        assert 0.1 < out.acceptance_rate < 0.8
        assert 2.0 < out.dispersion.mean() < 8.0

    def test_predictive_shapes_and_support(self):
        data = self._data()
        out = run_chain(data, HyperPriorSpec(), ChainConfig(120, 20), StateSpaceSpec.ar1(2),
                        rng=np.random.default_rng(0))
        rep = posterior_predictive(data, out, np.random.default_rng(1))
        assert rep.shape == (100, 30)
        assert rep.min() >= 0 and rep.max() <= 5
