"""Forward filtering and backward sampling for scalar-observation DLMs.

The model handled here is

    z_t    = x_t' beta_t + nu_t,          nu_t  ~ N(0, 1 / omega_t)
    beta_t = mu + Phi (beta_{t-1} - mu) + eps_t,  eps_t ~ N(0, W)

with beta_1 ~ N(m0, C0).  Steps flagged unobserved are predict-only.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from ._backend import kernels
from ._pure import chol_psd
from .errors import FilterBreakdownError

__all__ = [
    "FilterResult",
    "LatentPath",
    "PseudoData",
    "PseudoObservation",
    "StateSpaceSpec",
    "backward_sample",
    "ffbs_draw",
    "forward_filter",
    "simulate_dlm",
    "stationary_covariance",
]


def _as_matrix(value, p, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr * np.eye(p)
    elif arr.ndim == 1:
        arr = np.diag(arr)
    if arr.shape != (p, p):
        raise ValueError(f"{name} must be {p}x{p}, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def _as_vector(value, p, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (p,))
    return np.ascontiguousarray(arr, dtype=float)


def stationary_covariance(phi, w):
    """Stationary covariance S of the AR(1) evolution: S = Phi S Phi' + W."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if np.max(np.abs(np.linalg.eigvals(phi))) >= 1.0:
        raise ValueError("Phi has an eigenvalue on or outside the unit circle; no stationary law")
    s = solve_discrete_lyapunov(phi, w)
    return 0.5 * (s + s.T)


@dataclass
class StateSpaceSpec:
    """AR(1) latent dynamics and the prior on the first state.

    ``phi``, ``w`` and ``c0`` accept scalars (times identity), vectors
    (diagonal) or full matrices.  ``w`` may be singular (zero innovation);
    ``c0`` may be singular too, which pins the first state.
    """

    mu: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    m0: np.ndarray
    c0: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        p = mu.shape[0]
        self.mu = np.ascontiguousarray(mu)
        self.phi = _as_matrix(self.phi, p, "phi")
        self.w = _as_matrix(self.w, p, "w")
        self.m0 = _as_vector(self.m0, p, "m0")
        self.c0 = _as_matrix(self.c0, p, "c0")
        for name in ("mu", "phi", "w", "m0", "c0"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")
        for name in ("w", "c0"):
            mat = getattr(self, name)
            if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(mat).max())):
                raise ValueError(f"{name} must be symmetric")
            try:
                chol_psd(mat)
            except FilterBreakdownError:
                raise ValueError(f"{name} must be positive semi-definite") from None

    @property
    def dim(self):
        return self.mu.shape[0]

    @property
    def phi_is_diagonal(self):
        return bool(np.all(self.phi == np.diag(np.diag(self.phi))))

    @classmethod
    def ar1(cls, p, phi=0.95, w=0.01, mu=0.0, m0=None, c0=None):
        """Diagonal AR(1) spec; ``c0`` defaults to the stationary covariance."""
        mu = _as_vector(mu, p, "mu")
        phi = _as_matrix(phi, p, "phi")
        w = _as_matrix(w, p, "w")
        if c0 is None:
            c0 = stationary_covariance(phi, w)
        return cls(mu=mu, phi=phi, w=w, m0=mu if m0 is None else m0, c0=c0)

    def replace(self, **changes):
        fields = dict(mu=self.mu, phi=self.phi, w=self.w, m0=self.m0, c0=self.c0)
        fields.update(changes)
        return StateSpaceSpec(**fields)


@dataclass(frozen=True)
class PseudoObservation:
    """One Gaussian pseudo-datum ``z`` with precision ``omega`` and covariates ``x``."""

    z: float
    precision: float
    x: np.ndarray
    observed: bool = True

    def __post_init__(self):
        if self.observed and not self.precision > 0:
            raise ValueError("observed pseudo-data need positive precision")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("covariates must be finite")


@dataclass
class PseudoData:
    """Column-oriented series of pseudo-observations.

    Unobserved steps carry precision 0 and are skipped by the filter.
    """

    z: np.ndarray
    precision: np.ndarray
    x: np.ndarray
    observed: np.ndarray = None

    def __post_init__(self):
        self.x = np.ascontiguousarray(np.atleast_2d(np.asarray(self.x, dtype=float)))
        t_len = self.x.shape[0]
        self.z = np.ascontiguousarray(np.broadcast_to(np.asarray(self.z, dtype=float), (t_len,)))
        self.precision = np.ascontiguousarray(
            np.broadcast_to(np.asarray(self.precision, dtype=float), (t_len,))
        )
        if self.observed is None:
            self.observed = np.ones(t_len, dtype=bool)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.observed.shape != (t_len,):
            raise ValueError("observed flags must have one entry per step")
        if np.any(self.precision[self.observed] <= 0):
            raise ValueError("observed pseudo-data need positive precision")

    @classmethod
    def from_observations(cls, obs):
        obs = list(obs)
        if not obs:
            raise ValueError("need at least one observation")
        return cls(
            z=[o.z if o.observed else 0.0 for o in obs],
            precision=[o.precision if o.observed else 0.0 for o in obs],
            x=np.stack([np.atleast_1d(np.asarray(o.x, dtype=float)) for o in obs]),
            observed=[o.observed for o in obs],
        )

    def __len__(self):
        return self.x.shape[0]

    def __getitem__(self, t):
        return PseudoObservation(
            float(self.z[t]), float(self.precision[t]), self.x[t].copy(), bool(self.observed[t])
        )


def _pseudo(obs):
    if isinstance(obs, PseudoData):
        return obs
    return PseudoData.from_observations(obs)


@dataclass
class FilterResult:
    """Filtered moments (m_t, C_t) and one-step predictive moments (a_t, R_t)."""

    means: np.ndarray
    covs: np.ndarray
    pred_means: np.ndarray
    pred_covs: np.ndarray
    loglik: float = field(default=float("nan"))


@dataclass
class LatentPath:
    betas: np.ndarray

    def __post_init__(self):
        self.betas = np.atleast_2d(np.asarray(self.betas, dtype=float))
        if not np.all(np.isfinite(self.betas)):
            raise FilterBreakdownError("sampled path has non-finite entries")

    def __len__(self):
        return self.betas.shape[0]


def _check_dims(spec, data):
    if len(data) == 0:
        raise ValueError("need at least one observation")
    if data.x.shape[1] != spec.dim:
        raise ValueError(f"covariates have {data.x.shape[1]} columns, state has {spec.dim}")


def forward_filter(spec, obs):
    """Kalman filter over ``obs`` (PseudoData or a sequence of PseudoObservation)."""
    data = _pseudo(obs)
    _check_dims(spec, data)
    m, c, a, r, loglik = kernels.ffbs_filter(
        data.z, data.precision, data.x, data.observed,
        spec.mu, spec.phi, spec.w, spec.m0, spec.c0,
    )
    return FilterResult(np.asarray(m), np.asarray(c), np.asarray(a), np.asarray(r), float(loglik))


def backward_sample(spec, filt, rng):
    """Draw one path from p(beta_1..T | z) given the filter output."""
    betas = kernels.ffbs_backward(
        np.ascontiguousarray(filt.means), np.ascontiguousarray(filt.covs),
        np.ascontiguousarray(filt.pred_means), np.ascontiguousarray(filt.pred_covs),
        spec.phi, spec.w, rng,
    )
    return LatentPath(np.asarray(betas))


def ffbs_draw(spec, obs, rng):
    """Filter and sample in one kernel call (what the Gibbs sweep uses)."""
    data = _pseudo(obs)
    _check_dims(spec, data)
    betas = kernels.ffbs_draw(
        data.z, data.precision, data.x, data.observed,
        spec.mu, spec.phi, spec.w, spec.m0, spec.c0, rng,
    )
    return LatentPath(np.asarray(betas))


def simulate_dlm(spec, T, rng):
    """Simulate beta_1 ~ N(m0, C0) followed by T - 1 AR(1) transitions."""
    if T < 1:
        raise ValueError("T must be >= 1")
    p = spec.dim
    l0 = chol_psd(spec.c0)
    lw = chol_psd(spec.w)
    eps = rng.standard_normal((T, p))
    betas = np.empty((T, p))
    betas[0] = spec.m0 + l0 @ eps[0]
    noise = eps[1:] @ lw.T
    mu = spec.mu
    if spec.phi_is_diagonal:
        phi = np.diag(spec.phi)
        prev = betas[0] - mu
        for t in range(1, T):
            prev = phi * prev + noise[t - 1]
            betas[t] = prev
        betas[1:] += mu
    else:
        phi = spec.phi
        for t in range(1, T):
            betas[t] = mu + phi @ (betas[t - 1] - mu) + noise[t - 1]
    return LatentPath(betas)
