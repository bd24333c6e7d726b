"""Gibbs samplers for dynamic binomial-logit and negative-binomial regression.

Both likelihoods have the form exp(psi)^a / (1 + exp(psi))^b.  Given
omega_t ~ PG(b_t, psi_t) the states see Gaussian pseudo-data

    z_t = kappa_t / omega_t + offset_t - alpha,   precision omega_t,

with kappa_t = a_t - b_t / 2.  For the logit model a_t = y_t, b_t = n_t and
the offset is 0.  For the negative binomial the linear predictor is the
log-mean lambda_t, psi_t = lambda_t - log d, a_t = y_t, b_t = y_t + d and the
offset is log d.

One sweep updates, in order: omega, the state path (FFBS), the static
intercept alpha, the AR(1) hyperparameters and the dispersion d.
"""
from dataclasses import asdict, dataclass, field, replace
import math
import time

import numpy as np
from scipy.special import gammaln

from .errors import DataError, RejectionCapError
from .ffbs import LatentPath, PseudoData, StateSpaceSpec, ffbs_draw
from .pgsampler import DEFAULT_THRESHOLD, DEFAULT_TRUNC, sample_pg_array

__all__ = [
    "AugmentedObservation",
    "BinomLogitSeries",
    "ChainConfig",
    "ChainOutput",
    "ChainState",
    "HyperPriorSpec",
    "NegBinSeries",
    "augment",
    "binom_draw_omegas",
    "binom_kappa",
    "binom_pseudo_obs",
    "dispersion_log_accept_ratio",
    "draw_alpha",
    "draw_ar_hyperparams",
    "draw_dispersion",
    "gibbs_step",
    "init_state",
    "linear_predictor",
    "nb_draw_omegas",
    "nb_loglik",
    "nb_pseudo_obs",
    "posterior_predictive",
    "run_chain",
]

MIN_OMEGA = 1e-300
MAX_REJECTIONS = 10_000
ADAPT_WINDOW = 50


def _covariates(x, t_len=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if t_len is not None and x.shape[0] != t_len:
        raise DataError(f"covariates have {x.shape[0]} rows, response has {t_len}")
    if not np.all(np.isfinite(x)):
        raise DataError("covariates must be finite")
    return np.ascontiguousarray(x)


def _observed_flags(y, observed):
    y = np.asarray(y, dtype=float)
    if observed is None:
        observed = np.isfinite(y)
    observed = np.asarray(observed, dtype=bool)
    if observed.shape != y.shape:
        raise DataError("observed flags must match the response length")
    y = np.where(observed, y, 0.0)
    if not np.all(np.isfinite(y)):
        raise DataError("observed responses must be finite")
    return y, observed


@dataclass
class BinomLogitSeries:
    """y_t successes out of n_t trials with covariate rows x_t.

    Missing responses may be given as NaN or through ``observed``.
    """

    y: np.ndarray
    n: np.ndarray
    x: np.ndarray
    observed: np.ndarray = None

    family = "binom-logit"

    def __post_init__(self):
        self.y, self.observed = _observed_flags(self.y, self.observed)
        t_len = self.y.shape[0]
        self.n = np.broadcast_to(np.asarray(self.n, dtype=float), (t_len,)).copy()
        self.x = _covariates(self.x, t_len)
        if np.any(self.n < 1) or np.any(self.n != np.floor(self.n)):
            raise DataError("trial counts must be integers >= 1")
        yo = self.y[self.observed]
        if np.any(yo != np.floor(yo)):
            raise DataError("successes must be integers")
        bad = np.flatnonzero(self.observed & ((self.y < 0) | (self.y > self.n)))
        if bad.size:
            t = int(bad[0])
            raise DataError(f"step {t}: y={self.y[t]:g} outside [0, n={self.n[t]:g}]")

    @property
    def T(self):
        return self.y.shape[0]

    @property
    def P(self):
        return self.x.shape[1]


@dataclass
class NegBinSeries:
    """Counts y_t with covariate rows x_t; missing as NaN or via ``observed``."""

    y: np.ndarray
    x: np.ndarray
    observed: np.ndarray = None

    family = "neg-binom"

    def __post_init__(self):
        self.y, self.observed = _observed_flags(self.y, self.observed)
        self.x = _covariates(self.x, self.y.shape[0])
        yo = self.y[self.observed]
        if np.any(yo < 0) or np.any(yo != np.floor(yo)):
            t = int(np.flatnonzero(self.observed & ((self.y < 0) | (self.y != np.floor(self.y))))[0])
            raise DataError(f"step {t}: count {self.y[t]:g} is not a non-negative integer")

    @property
    def T(self):
        return self.y.shape[0]

    @property
    def P(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class AugmentedObservation:
    """Likelihood exponents and PG latent of one time step."""

    a: float
    b: float
    kappa: float
    omega: float
    psi: float
    lam: float = float("nan")


@dataclass
class HyperPriorSpec:
    """Priors and estimate-or-fix switches.

    mu_i ~ N(mu_mean, mu_var); Phi_ii ~ N(phi_mean, phi_var) truncated to
    (-1, 1); W_ii ~ InvGamma(w_shape, w_scale); alpha ~ N(alpha_mean,
    alpha_var).  The dispersion prior is either ``"uniform"`` (improper,
    flat on d > 0) or ``"lognormal"`` with log-scale mean/sd.
    """

    estimate_mu: bool = False
    estimate_phi: bool = False
    estimate_w: bool = False
    estimate_alpha: bool = True
    estimate_dispersion: bool = True
    mu_mean: float = 0.0
    mu_var: float = 1.0
    phi_mean: float = 0.9
    phi_var: float = 0.1
    w_shape: float = 2.0
    w_scale: float = 0.01
    alpha_mean: float = 0.0
    alpha_var: float = 100.0
    dispersion_prior: str = "uniform"
    dispersion_logmean: float = 0.0
    dispersion_logsd: float = 1.0
    dispersion_step: float = 0.3

    def __post_init__(self):
        for name in ("mu_var", "phi_var", "w_shape", "w_scale", "alpha_var",
                     "dispersion_logsd", ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dispersion_step < 0:
            raise ValueError("dispersion_step must be non-negative")
        if self.dispersion_prior not in ("uniform", "lognormal"):
            raise ValueError(f"unknown dispersion prior {self.dispersion_prior!r}")

    @property
    def estimate_ar(self):
        return self.estimate_mu or self.estimate_phi or self.estimate_w

    @classmethod
    def with_ar(cls, **kwargs):
        """Priors with all three AR(1) blocks estimated."""
        return cls(estimate_mu=True, estimate_phi=True, estimate_w=True, **kwargs)

    def to_dict(self):
        return asdict(self)


@dataclass
class ChainState:
    path: np.ndarray
    omegas: np.ndarray
    alpha: float
    spec: StateSpaceSpec
    dispersion: float = 1.0
    dispersion_step: float = 0.3
    mh_accepted: int = 0
    mh_proposed: int = 0

    def copy(self):
        return replace(self, path=self.path.copy(), omegas=self.omegas.copy())


@dataclass
class ChainConfig:
    iterations: int = 12_000
    burnin: int = 2_000
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.iterations > self.burnin >= 0:
            raise ValueError("need iterations > burnin >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def n_stored(self):
        return len(range(self.burnin, self.iterations, self.thin))


@dataclass
class ChainOutput:
    """Post-burn-in draws and phase timings."""

    betas: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    dispersion: np.ndarray
    burnin_seconds: float
    sampling_seconds: float
    acceptance_rate: float
    final_state: ChainState = field(repr=False, default=None)

    @property
    def n_draws(self):
        return self.betas.shape[0]


# ---------------------------------------------------------------------------
# augmentation pieces

def linear_predictor(series, path, alpha):
    """alpha + x_t' beta_t for every step (log-odds or log-mean)."""
    path = path.betas if isinstance(path, LatentPath) else path
    return alpha + np.einsum("tp,tp->t", series.x, path)


def binom_kappa(series):
    return series.y - 0.5 * series.n


def _nb_exponents(series, dispersion):
    b = series.y + dispersion
    kappa = 0.5 * (series.y - dispersion)
    return b, kappa


def augment(series, state):
    """Per-step (a, b, kappa, omega, psi[, lambda]) for inspection and tests."""
    eta = linear_predictor(series, state.path, state.alpha)
    out = []
    for t in range(series.T):
        if series.family == "binom-logit":
            a, b = series.y[t], series.n[t]
            out.append(AugmentedObservation(a, b, a - 0.5 * b, state.omegas[t], eta[t]))
        else:
            d = state.dispersion
            a, b = series.y[t], series.y[t] + d
            out.append(AugmentedObservation(a, b, a - 0.5 * b, state.omegas[t],
                                            eta[t] - math.log(d), eta[t]))
    return out


def binom_draw_omegas(series, path, alpha, rng, out=None):
    """omega_t ~ PG(n_t, psi_t); unobserved entries of ``out`` are left as they are."""
    if out is None:
        out = np.zeros(series.T)
    psi = linear_predictor(series, path, alpha)
    return sample_pg_array(series.n, psi, rng, out=out, mask=series.observed)


def nb_draw_omegas(series, path, alpha, dispersion, rng, out=None,
                   threshold=DEFAULT_THRESHOLD, trunc=DEFAULT_TRUNC):
    """omega_t ~ PG(y_t + d, lambda_t - log d)."""
    if not dispersion > 0:
        raise ValueError("dispersion must be positive")
    if out is None:
        out = np.zeros(series.T)
    psi = linear_predictor(series, path, alpha) - math.log(dispersion)
    b, _ = _nb_exponents(series, dispersion)
    return sample_pg_array(b, psi, rng, out=out, mask=series.observed,
                           threshold=threshold, trunc=trunc)


def _pseudo(series, kappa, offset, omegas, alpha):
    obs = series.observed
    w = np.where(obs, omegas, 0.0)
    if np.any(w[obs] < MIN_OMEGA):
        t = int(np.flatnonzero(obs & (w < MIN_OMEGA))[0])
        raise FloatingPointError(f"PG latent at step {t} is {w[t]:.3e}; cannot form pseudo-datum")
    z = np.zeros(series.T)
    z[obs] = kappa[obs] / w[obs] + offset - alpha
    return PseudoData(z=z, precision=w, x=series.x, observed=obs)


def binom_pseudo_obs(series, omegas, alpha):
    """z_t = kappa_t / omega_t - alpha with precision omega_t."""
    return _pseudo(series, binom_kappa(series), 0.0, omegas, alpha)


def nb_pseudo_obs(series, omegas, alpha, dispersion):
    """z_t = (y_t - d) / (2 omega_t) + log d - alpha with precision omega_t."""
    _, kappa = _nb_exponents(series, dispersion)
    return _pseudo(series, kappa, math.log(dispersion), omegas, alpha)


# ---------------------------------------------------------------------------
# static parameters

def alpha_conditional(residuals, omegas, observed, prior_mean, prior_var):
    """Mean and variance of alpha | omega, B, y (precision-weighted least squares)."""
    w = np.where(observed, omegas, 0.0)
    r = np.where(observed, residuals, 0.0)
    prec = 1.0 / prior_var + w.sum()
    mean = (prior_mean / prior_var + np.dot(w, r)) / prec
    return mean, 1.0 / prec


def draw_alpha(residuals, omegas, observed, prior_mean, prior_var, rng):
    """Draw alpha given pseudo-residuals z_t + alpha - x_t' beta_t."""
    if not prior_var > 0:
        raise ValueError("prior variance must be positive")
    mean, var = alpha_conditional(residuals, omegas, observed, prior_mean, prior_var)
    return mean + math.sqrt(var) * rng.standard_normal()


def _truncated_normal_unit(mean, sd, rng):
    for _ in range(MAX_REJECTIONS):
        v = mean + sd * rng.standard_normal()
        if -1.0 < v < 1.0:
            return v
    raise RejectionCapError(
        f"AR coefficient draw: N({mean:.3g}, {sd:.3g}^2) puts too little mass in (-1, 1)"
    )


def draw_ar_hyperparams(path, spec, priors, rng):
    """One sweep over components: W_ii, then mu_i, then Phi_ii.

    The first state's prior (m0, C0) is fixed, so only the T - 1
    transitions inform the hyperparameters.
    """
    betas = path.betas if isinstance(path, LatentPath) else np.asarray(path)
    if not priors.estimate_ar:
        return spec
    if not (spec.phi_is_diagonal and np.all(spec.w == np.diag(np.diag(spec.w)))):
        raise ValueError("estimating AR hyperparameters requires diagonal Phi and W")
    mu = spec.mu.copy()
    phi = np.diag(spec.phi).copy()
    w = np.diag(spec.w).copy()
    n_trans = betas.shape[0] - 1
    for i in range(spec.dim):
        prev = betas[:-1, i]
        cur = betas[1:, i]
        if priors.estimate_w:
            resid = cur - mu[i] - phi[i] * (prev - mu[i])
            shape = priors.w_shape + 0.5 * n_trans
            scale = priors.w_scale + 0.5 * np.dot(resid, resid)
            w[i] = scale / rng.standard_gamma(shape)
        if priors.estimate_mu:
            k = 1.0 - phi[i]
            prec = 1.0 / priors.mu_var + n_trans * k * k / w[i]
            mean = (priors.mu_mean / priors.mu_var + k * np.sum(cur - phi[i] * prev) / w[i]) / prec
            mu[i] = mean + rng.standard_normal() / math.sqrt(prec)
        if priors.estimate_phi:
            d_cur = cur - mu[i]
            d_prev = prev - mu[i]
            prec = 1.0 / priors.phi_var + np.dot(d_prev, d_prev) / w[i]
            mean = (priors.phi_mean / priors.phi_var + np.dot(d_cur, d_prev) / w[i]) / prec
            phi[i] = _truncated_normal_unit(mean, 1.0 / math.sqrt(prec), rng)
    return spec.replace(mu=mu, phi=np.diag(phi), w=np.diag(w))


def nb_loglik(y, dispersion, lam):
    """Sum of log NB(y_t | d, mean exp(lambda_t)) over the given steps."""
    d = dispersion
    log_d_plus_mean = np.logaddexp(math.log(d), lam)
    ll = (gammaln(y + d) - gammaln(d) - gammaln(y + 1.0)
          + d * (math.log(d) - log_d_plus_mean) + y * (lam - log_d_plus_mean))
    return float(np.sum(ll))


def _log_dispersion_prior(log_d, priors):
    # density of u = log d, Jacobian included
    if priors.dispersion_prior == "uniform":
        return log_d
    z = (log_d - priors.dispersion_logmean) / priors.dispersion_logsd
    return -0.5 * z * z


def dispersion_log_accept_ratio(series, lam, current, proposed, priors):
    """Log MH ratio for a symmetric random walk on log d (exactly 0 when nothing moves)."""
    if proposed == current:
        return 0.0
    obs = series.observed
    y, lam = series.y[obs], lam[obs]
    return (nb_loglik(y, proposed, lam) + _log_dispersion_prior(math.log(proposed), priors)
            - nb_loglik(y, current, lam) - _log_dispersion_prior(math.log(current), priors))


def draw_dispersion(series, path, alpha, current, priors, rng, step=None):
    """One random-walk Metropolis-Hastings step on log d.

    Returns ``(d, accepted)``.  ``step`` is the proposal sd on the log
    scale and defaults to ``priors.dispersion_step``.
    """
    step = priors.dispersion_step if step is None else step
    lam = linear_predictor(series, path, alpha)
    proposed = current * math.exp(step * rng.standard_normal())
    if proposed == current:
        return current, True
    log_r = dispersion_log_accept_ratio(series, lam, current, proposed, priors)
    if math.log(rng.random()) < log_r:
        return proposed, True
    return current, False


# ---------------------------------------------------------------------------
# the sweep

def init_state(data, spec, alpha=0.0, dispersion=1.0, step=0.3):
    """Start at the prior mean path with omegas at their PG(b, 0) means."""
    path = np.tile(spec.mu, (data.T, 1))
    if data.family == "binom-logit":
        b = data.n
    else:
        b = data.y + dispersion
    omegas = np.where(data.observed, 0.25 * b, 0.0)
    return ChainState(path=path, omegas=omegas, alpha=float(alpha), spec=spec,
                      dispersion=float(dispersion), dispersion_step=float(step))


def gibbs_step(state, data, priors, rng, adapt=False):
    """One full sweep: omega, pseudo-data, path, alpha, AR hyperparameters, d."""
    nb = data.family == "neg-binom"
    spec = state.spec
    alpha = state.alpha
    d = state.dispersion
    omegas = state.omegas.copy()
    if nb:
        nb_draw_omegas(data, state.path, alpha, d, rng, out=omegas)
        pseudo = nb_pseudo_obs(data, omegas, alpha, d)
    else:
        binom_draw_omegas(data, state.path, alpha, rng, out=omegas)
        pseudo = binom_pseudo_obs(data, omegas, alpha)
    path = ffbs_draw(spec, pseudo, rng).betas

    if priors.estimate_alpha:
        resid = pseudo.z + alpha - np.einsum("tp,tp->t", data.x, path)
        alpha = draw_alpha(resid, omegas, data.observed, priors.alpha_mean, priors.alpha_var, rng)

    if priors.estimate_ar:
        spec = draw_ar_hyperparams(path, spec, priors, rng)

    step = state.dispersion_step
    accepted, proposed = state.mh_accepted, state.mh_proposed
    if nb and priors.estimate_dispersion:
        d, ok = draw_dispersion(data, path, alpha, d, priors, rng, step=step)
        accepted += int(ok)
        proposed += 1
        if adapt and proposed % ADAPT_WINDOW == 0:
            rate = accepted / proposed
            if rate < 0.2:
                step *= 0.7
            elif rate > 0.5:
                step *= 1.3
            accepted = proposed = 0

    return ChainState(path=path, omegas=omegas, alpha=float(alpha), spec=spec,
                      dispersion=float(d), dispersion_step=step,
                      mh_accepted=accepted, mh_proposed=proposed)


def run_chain(data, priors, config, spec, alpha=0.0, dispersion=1.0, rng=None, state=None):
    """Run burn-in then record every ``thin``-th sweep.

    Dispersion step-size adaptation runs during burn-in only and is frozen
    afterwards.  ``sampling_seconds`` covers the post-burn-in phase only.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if state is None:
        state = init_state(data, spec, alpha, dispersion, priors.dispersion_step)
    n_keep = config.n_stored
    t_len, p = data.T, spec.dim
    betas = np.empty((n_keep, t_len, p))
    alphas = np.empty(n_keep)
    mus = np.empty((n_keep, p))
    phis = np.empty((n_keep, p))
    ws = np.empty((n_keep, p))
    ds = np.empty(n_keep)

    start = time.perf_counter()
    for _ in range(config.burnin):
        state = gibbs_step(state, data, priors, rng, adapt=True)
    burn_end = time.perf_counter()
    state = replace(state, mh_accepted=0, mh_proposed=0)
    k = 0
    for it in range(config.burnin, config.iterations):
        state = gibbs_step(state, data, priors, rng)
        if (it - config.burnin) % config.thin == 0:
            betas[k] = state.path
            alphas[k] = state.alpha
            mus[k] = state.spec.mu
            phis[k] = np.diag(state.spec.phi)
            ws[k] = np.diag(state.spec.w)
            ds[k] = state.dispersion
            k += 1
    end = time.perf_counter()
    rate = state.mh_accepted / state.mh_proposed if state.mh_proposed else float("nan")
    return ChainOutput(betas=betas, alpha=alphas, mu=mus, phi=phis, w=ws, dispersion=ds,
                       burnin_seconds=burn_end - start, sampling_seconds=end - burn_end,
                       acceptance_rate=rate, final_state=state)


def posterior_predictive(data, output, rng):
    """One replicate y_t per stored draw, at every step including missing ones."""
    eta = output.alpha[:, None] + np.einsum("mtp,tp->mt", output.betas, data.x)
    if data.family == "binom-logit":
        q = 1.0 / (1.0 + np.exp(-eta))
        return rng.binomial(data.n.astype(np.int64)[None, :], q).astype(float)
    d = output.dispersion[:, None]
    # numpy counts failures before d successes; success probability d / (d + mean)
    p = 1.0 / (1.0 + np.exp(eta - np.log(d)))
    return rng.negative_binomial(d, p).astype(float)
