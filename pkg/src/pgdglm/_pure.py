"""Pure-Python kernels.

Reference implementation of the hot loops (Polya-Gamma draws, forward
filtering, backward sampling).  ``_core.pyx`` implements the same algorithms
and consumes the generator's bit stream in the same order, so for a given
seed both backends return the same draws up to floating-point rounding.
"""
import math

import numpy as np
from scipy.special import log_ndtr

from .errors import FilterBreakdownError, PGSamplerError

TRUNC = 0.64
MAX_PROPOSALS = 10_000
PI = math.pi
LOG_4_OVER_PI = math.log(4.0 / PI)
PSD_RTOL = 1e-10

name = "python"


def _coef(n, x):
    # n-th term of the alternating series for the J*(1) density
    k = (n + 0.5) * PI
    if x > TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    if x > 0.0:
        expnt = -1.5 * (math.log(0.5 * PI) + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
        return math.exp(expnt)
    return 0.0


def _mass_texpon(z):
    """Probability of proposing from the exponential (right) piece."""
    t = TRUNC
    fz = 0.125 * PI * PI + 0.5 * z * z
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + float(log_ndtr(b))
    xa = x0 + z + float(log_ndtr(a))
    hi = xb if xb > xa else xa
    lo = xa if xb > xa else xb
    log_qdivp = LOG_4_OVER_PI + hi + math.log1p(math.exp(lo - hi))
    if log_qdivp > 0.0:
        e = math.exp(-log_qdivp)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(log_qdivp))


def _rtigauss(z, rng):
    # inverse-Gaussian(1/z, 1) truncated to (0, TRUNC)
    t = TRUNC
    x = t + 1.0
    if z < 1.0 / t:
        alpha = 0.0
        tries = 0
        while rng.random() > alpha:
            tries += 1
            if tries > MAX_PROPOSALS:
                raise PGSamplerError("truncated inverse-Gaussian proposal cap exceeded")
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        tries = 0
        while x > t:
            tries += 1
            if tries > MAX_PROPOSALS:
                raise PGSamplerError("truncated inverse-Gaussian proposal cap exceeded")
            y = rng.standard_normal()
            y = y * y
            x = mu + 0.5 * mu * mu * y - 0.5 * mu * math.sqrt(4.0 * mu * y + (mu * y) * (mu * y))
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


def pg1_draw(psi, rng):
    """One exact PG(1, psi) draw."""
    z = 0.5 * abs(psi)
    fz = 0.125 * PI * PI + 0.5 * z * z
    mass = _mass_texpon(z)
    for _ in range(MAX_PROPOSALS):
        if rng.random() < mass:
            x = TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(z, rng)
        s = _coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _coef(n, x)
                if y > s:
                    break
    raise PGSamplerError(f"PG(1, {psi}) exceeded {MAX_PROPOSALS} proposals")


def _tanh_ratio(h):
    # tanh(h) / h, continuous at 0
    if abs(h) < 1e-6:
        return 1.0 - h * h / 3.0
    return math.tanh(h) / h


def pg_series_draw(b, psi, rng, trunc=200):
    """Truncated sum-of-gammas draw with the omitted tail replaced by its mean."""
    a2 = (psi / (2.0 * PI)) ** 2
    total = 0.0
    inv_sum = 0.0
    for k in range(1, trunc + 1):
        d = (k - 0.5) * (k - 0.5) + a2
        total += rng.standard_gamma(b) / d
        inv_sum += 1.0 / d
    full = 0.5 * PI * PI * _tanh_ratio(0.5 * psi)
    return (total + b * (full - inv_sum)) / (2.0 * PI * PI)


def pg_draw(b, psi, rng, threshold=50, trunc=200):
    if not b > 0.0:
        raise ValueError(f"PG shape must be positive, got {b}")
    if b == math.floor(b) and b <= threshold:
        x = 0.0
        for _ in range(int(b)):
            x += pg1_draw(psi, rng)
        return x
    return pg_series_draw(b, psi, rng, trunc)


def pg_draw_many(b, psi, rng, out, mask=None, threshold=50, trunc=200):
    """Fill ``out[i]`` with PG(b[i], psi[i]) for every i with ``mask[i]`` set."""
    for i in range(out.shape[0]):
        if mask is None or mask[i]:
            out[i] = pg_draw(float(b[i]), float(psi[i]), rng, threshold, trunc)
    return out


def chol_psd(a):
    """Lower Cholesky factor tolerating exactly singular PSD input.

    Pivots within ``PSD_RTOL`` of zero (relative to the largest diagonal
    entry) zero their column; more negative pivots raise.
    """
    p = a.shape[0]
    scale = max(float(np.max(np.abs(np.diag(a)))), 1e-300)
    tol = PSD_RTOL * scale
    l = np.zeros_like(a)
    for j in range(p):
        s = a[j, j]
        for k in range(j):
            s -= l[j, k] * l[j, k]
        if s > tol:
            d = math.sqrt(s)
            l[j, j] = d
            for i in range(j + 1, p):
                v = a[i, j]
                for k in range(j):
                    v -= l[i, k] * l[j, k]
                l[i, j] = v / d
        elif s < -tol:
            raise FilterBreakdownError(f"matrix not positive semi-definite (pivot {s:.3e})")
    return l


def ffbs_filter(z, prec, x, observed, mu, phi, w, m0, c0):
    t_len, p = x.shape
    m = np.empty((t_len, p))
    c = np.empty((t_len, p, p))
    a = np.empty((t_len, p))
    r = np.empty((t_len, p, p))
    loglik = 0.0
    for t in range(t_len):
        if t == 0:
            at = np.array(m0, dtype=float)
            rt = np.array(c0, dtype=float)
        else:
            at = mu + phi @ (m[t - 1] - mu)
            rt = phi @ c[t - 1] @ phi.T + w
        rt = 0.5 * (rt + rt.T)
        a[t] = at
        r[t] = rt
        if observed[t]:
            xt = x[t]
            rx = rt @ xt
            q = float(xt @ rx) + 1.0 / prec[t]
            if not q > 0.0:
                raise FilterBreakdownError(f"non-positive predictive variance at step {t}")
            e = z[t] - float(xt @ at)
            m[t] = at + rx * (e / q)
            ct = rt - np.outer(rx, rx) / q
            c[t] = 0.5 * (ct + ct.T)
            loglik -= 0.5 * (math.log(2.0 * PI * q) + e * e / q)
        else:
            m[t] = at
            c[t] = rt
    return m, c, a, r, loglik


def ffbs_backward(m, c, a, r, phi, w, rng):
    t_len, p = m.shape
    beta = np.empty((t_len, p))
    eye = np.eye(p)
    eps = rng.standard_normal(p)
    beta[-1] = m[-1] + chol_psd(c[-1]) @ eps
    for t in range(t_len - 2, -1, -1):
        lr = chol_psd(r[t + 1])
        if np.any(np.diag(lr) == 0.0):
            raise FilterBreakdownError(f"singular one-step covariance at step {t + 1}")
        g = phi @ c[t]
        jt = np.linalg.solve(lr.T, np.linalg.solve(lr, g))
        j = jt.T
        h = m[t] + j @ (beta[t + 1] - a[t + 1])
        bmat = eye - j @ phi
        hcov = bmat @ c[t] @ bmat.T + j @ w @ j.T
        hcov = 0.5 * (hcov + hcov.T)
        eps = rng.standard_normal(p)
        beta[t] = h + chol_psd(hcov) @ eps
    return beta


def ffbs_draw(z, prec, x, observed, mu, phi, w, m0, c0, rng):
    m, c, a, r, _ = ffbs_filter(z, prec, x, observed, mu, phi, w, m0, c0)
    return ffbs_backward(m, c, a, r, phi, w, rng)
