"""Polya-Gamma random variates.

PG(1, psi) is drawn exactly with the alternating-series accept/reject
sampler (exponential / truncated inverse-Gaussian proposal split at 0.64).
PG(b, psi) for integer ``b`` up to ``threshold`` is a sum of ``b`` such
draws; any other ``b`` uses the sum-of-gammas series truncated at ``trunc``
terms, with the omitted tail replaced by its expectation so the mean is
exact.

All samplers take a ``numpy.random.Generator`` that the caller owns.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

from ._backend import kernels
from .errors import PGSamplerError

__all__ = [
    "PGParams",
    "PGSamplerError",
    "pg_density_series",
    "pg_mean",
    "pg_variance",
    "sample_pg",
    "sample_pg1",
    "sample_pg_array",
]

DEFAULT_THRESHOLD = 50
DEFAULT_TRUNC = 200


@dataclass(frozen=True)
class PGParams:
    """Shape ``b`` and tilt ``psi`` of a PG(b, psi) distribution."""

    b: float
    psi: float

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError(f"PG shape b must be positive, got {self.b}")
        if not math.isfinite(self.psi):
            raise ValueError(f"PG tilt psi must be finite, got {self.psi}")


def sample_pg1(psi, rng):
    """Draw one exact PG(1, psi) variate."""
    if not math.isfinite(psi):
        raise ValueError(f"psi must be finite, got {psi}")
    return kernels.pg1_draw(float(psi), rng)


def sample_pg(params, rng, threshold=DEFAULT_THRESHOLD, trunc=DEFAULT_TRUNC):
    """Draw one PG(b, psi) variate.

    Parameters
    ----------
    params : PGParams or tuple
        ``(b, psi)``; ``b`` must be positive.
    rng : numpy.random.Generator
    threshold : int
        Largest integer ``b`` sampled by convolution of PG(1, psi) draws.
    trunc : int
        Number of gamma terms for the series sampler.
    """
    if not isinstance(params, PGParams):
        params = PGParams(*params)
    return kernels.pg_draw(float(params.b), float(params.psi), rng, threshold, trunc)


def sample_pg_array(b, psi, rng, out=None, mask=None,
                    threshold=DEFAULT_THRESHOLD, trunc=DEFAULT_TRUNC):
    """Independent PG(b[i], psi[i]) draws, broadcasting ``b`` against ``psi``.

    Entries where ``mask`` is false are left untouched in ``out``.
    """
    b, psi = np.broadcast_arrays(np.asarray(b, dtype=float), np.asarray(psi, dtype=float))
    shape = b.shape
    b = np.ascontiguousarray(b.ravel())
    psi = np.ascontiguousarray(psi.ravel())
    if out is None:
        flat = np.zeros(b.shape[0])
        result = flat.reshape(shape)
    else:
        if out.size != b.shape[0] or not out.flags.c_contiguous:
            raise ValueError("out must be C-contiguous with one slot per draw")
        flat = out.reshape(-1)
        result = out
    if mask is not None:
        mask = np.ascontiguousarray(np.broadcast_to(mask, shape), dtype=np.uint8).ravel()
    kernels.pg_draw_many(b, psi, rng, flat, mask, threshold, trunc)
    return result


def pg_mean(b, c):
    """E[PG(b, c)] = b / (2c) * tanh(c / 2), equal to b/4 at c = 0."""
    h = 0.5 * np.abs(np.asarray(c, dtype=float))
    small = h < 1e-4
    hs = np.where(small, 1.0, h)
    ratio = np.where(small, 1.0 - h * h / 3.0 + 2.0 * h**4 / 15.0, np.tanh(hs) / hs)
    out = 0.25 * np.asarray(b, dtype=float) * ratio
    return float(out) if out.ndim == 0 else out


def pg_variance(b, c):
    """Var[PG(b, c)] = b / (4 c^3) * (sinh c - c) * sech^2(c / 2), equal to b/24 at c = 0."""
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 0.1
    cs = np.where(small, 1.0, c)
    h = 0.5 * cs
    # (sinh c - c) sech^2(c/2) = 2 tanh(c/2) - c sech^2(c/2); no overflow for large c
    big = (2.0 * np.tanh(h) - cs / np.cosh(np.minimum(h, 350.0)) ** 2) / cs**3
    c2 = c * c
    series = (1.0 / 6.0 + c2 / 120.0 + c2 * c2 / 5040.0 + c2**3 / 362880.0) / np.cosh(0.5 * c) ** 2
    out = 0.25 * np.asarray(b, dtype=float) * np.where(small, series, big)
    return float(out) if out.ndim == 0 else out


def _log_cosh(h):
    h = abs(h)
    return h + math.log1p(math.exp(-2.0 * h)) - math.log(2.0)


def _density_one(x, b, c, terms):
    if not x > 0:
        raise ValueError(f"density argument must be positive, got {x}")
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    if terms < 1:
        raise ValueError("terms must be >= 1")
    y = 4.0 * x
    n = np.arange(terms, dtype=float)
    k = 2.0 * n + b
    log_terms = (
        b * math.log(2.0) - gammaln(b) + gammaln(n + b) - gammaln(n + 1.0)
        + np.log(k) - 0.5 * math.log(2.0 * math.pi) - 1.5 * math.log(y) - k * k / (2.0 * y)
    )
    signs = np.where(n % 2 == 0, 1.0, -1.0)
    shift = log_terms.max()
    untilted = math.exp(shift) * float(np.sum(signs * np.exp(log_terms - shift)))
    log_tilt = b * _log_cosh(0.5 * c) - 0.5 * x * c * c + math.log(4.0)
    return max(untilted, 0.0) * math.exp(log_tilt)


def pg_density_series(x, b, c, terms=200):
    """Density of PG(b, c) at ``x`` (scalar or array) from a truncated alternating series.

    Uses p(x | b, c) = cosh^b(c/2) exp(-x c^2 / 2) p(x | b, 0), with the
    untilted density written as the J*(b) series evaluated at 4x.
    Intended for tests; the Gibbs samplers never evaluate densities.
    """
    if np.ndim(x) == 0:
        return _density_one(float(x), b, c, terms)
    x = np.asarray(x, dtype=float)
    return np.array([_density_one(v, b, c, terms) for v in x.ravel()]).reshape(x.shape)
