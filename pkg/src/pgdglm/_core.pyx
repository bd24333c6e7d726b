# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Polya-Gamma draws and forward-filter backward-sample.

Mirrors ``_pure.py`` operation for operation.  Random variates come from the
bit generator behind a ``numpy.random.Generator`` through numpy's C
distribution functions, so the stream is consumed exactly as the
pure-Python path consumes it.
"""
import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, fabs, floor, log, log1p, sqrt, tanh, M_PI
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential,
    random_standard_gamma,
    random_standard_normal,
    random_standard_uniform,
)
from scipy.special.cython_special cimport log_ndtr

from .errors import FilterBreakdownError, PGSamplerError

name = "cython"

cdef double TRUNC = 0.64
cdef int MAX_PROPOSALS = 10000
cdef double LOG_4_OVER_PI = log(4.0 / M_PI)
cdef double PSD_RTOL = 1e-10

# status codes returned from nogil sections
cdef int OK = 0
cdef int PG_CAP = 1
cdef int NOT_PSD = 2
cdef int SINGULAR = 3
cdef int BAD_Q = 4


cdef bitgen_t* _bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("rng must be a numpy.random.Generator")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _coef(int n, double x) noexcept nogil:
    cdef double k = (n + 0.5) * M_PI
    cdef double expnt
    if x > TRUNC:
        return k * exp(-0.5 * k * k * x)
    if x > 0.0:
        expnt = -1.5 * (log(0.5 * M_PI) + log(x)) + log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
        return exp(expnt)
    return 0.0


cdef double _mass_texpon(double z) noexcept nogil:
    cdef double t = TRUNC
    cdef double fz = 0.125 * M_PI * M_PI + 0.5 * z * z
    cdef double b = sqrt(1.0 / t) * (t * z - 1.0)
    cdef double a = -sqrt(1.0 / t) * (t * z + 1.0)
    cdef double x0 = log(fz) + fz * t
    cdef double xb = x0 - z + log_ndtr(b)
    cdef double xa = x0 + z + log_ndtr(a)
    cdef double hi = xb if xb > xa else xa
    cdef double lo = xa if xb > xa else xb
    cdef double log_qdivp = LOG_4_OVER_PI + hi + log1p(exp(lo - hi))
    cdef double e
    if log_qdivp > 0.0:
        e = exp(-log_qdivp)
        return e / (1.0 + e)
    return 1.0 / (1.0 + exp(log_qdivp))


cdef double _rtigauss(double z, bitgen_t* bg) noexcept nogil:
    cdef double t = TRUNC
    cdef double x = t + 1.0
    cdef double alpha, e1, e2, mu, y
    cdef int tries = 0
    if z < 1.0 / t:
        alpha = 0.0
        while random_standard_uniform(bg) > alpha:
            tries += 1
            if tries > MAX_PROPOSALS:
                return -1.0
            e1 = random_standard_exponential(bg)
            e2 = random_standard_exponential(bg)
            while e1 * e1 > 2.0 * e2 / t:
                e1 = random_standard_exponential(bg)
                e2 = random_standard_exponential(bg)
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            alpha = exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            tries += 1
            if tries > MAX_PROPOSALS:
                return -1.0
            y = random_standard_normal(bg)
            y = y * y
            x = mu + 0.5 * mu * mu * y - 0.5 * mu * sqrt(4.0 * mu * y + (mu * y) * (mu * y))
            if random_standard_uniform(bg) > mu / (mu + x):
                x = mu * mu / x
    return x


cdef double _pg1(double psi, bitgen_t* bg) noexcept nogil:
    cdef double z = 0.5 * fabs(psi)
    cdef double fz = 0.125 * M_PI * M_PI + 0.5 * z * z
    cdef double mass = _mass_texpon(z)
    cdef double x, s, y
    cdef int n, proposal
    for proposal in range(MAX_PROPOSALS):
        if random_standard_uniform(bg) < mass:
            x = TRUNC + random_standard_exponential(bg) / fz
        else:
            x = _rtigauss(z, bg)
            if x < 0.0:
                return -1.0
        s = _coef(0, x)
        y = random_standard_uniform(bg) * s
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
    return -1.0


cdef inline double _tanh_ratio(double h) noexcept nogil:
    if fabs(h) < 1e-6:
        return 1.0 - h * h / 3.0
    return tanh(h) / h


cdef double _pg_series(double b, double psi, int trunc, bitgen_t* bg) noexcept nogil:
    cdef double a2 = (psi / (2.0 * M_PI)) * (psi / (2.0 * M_PI))
    cdef double total = 0.0
    cdef double inv_sum = 0.0
    cdef double d, full
    cdef int k
    for k in range(1, trunc + 1):
        d = (k - 0.5) * (k - 0.5) + a2
        total += random_standard_gamma(bg, b) / d
        inv_sum += 1.0 / d
    full = 0.5 * M_PI * M_PI * _tanh_ratio(0.5 * psi)
    return (total + b * (full - inv_sum)) / (2.0 * M_PI * M_PI)


cdef double _pg(double b, double psi, int threshold, int trunc, bitgen_t* bg) noexcept nogil:
    cdef double x = 0.0
    cdef double v
    cdef int i
    if b == floor(b) and b <= threshold:
        for i in range(<int> b):
            v = _pg1(psi, bg)
            if v < 0.0:
                return -1.0
            x += v
        return x
    return _pg_series(b, psi, trunc, bg)


def pg1_draw(double psi, rng):
    """One exact PG(1, psi) draw."""
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double x
    with rng.bit_generator.lock, nogil:
        x = _pg1(psi, bg)
    if x < 0.0:
        raise PGSamplerError(f"PG(1, {psi}) exceeded {MAX_PROPOSALS} proposals")
    return x


def pg_series_draw(double b, double psi, rng, int trunc=200):
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double x
    with rng.bit_generator.lock, nogil:
        x = _pg_series(b, psi, trunc, bg)
    return x


def pg_draw(double b, double psi, rng, int threshold=50, int trunc=200):
    if not b > 0.0:
        raise ValueError(f"PG shape must be positive, got {b}")
    cdef bitgen_t* bg = _bitgen(rng)
    cdef double x
    with rng.bit_generator.lock, nogil:
        x = _pg(b, psi, threshold, trunc, bg)
    if x < 0.0:
        raise PGSamplerError(f"PG({b}, {psi}) exceeded {MAX_PROPOSALS} proposals")
    return x


def pg_draw_many(const double[::1] b, const double[::1] psi, rng, double[::1] out,
                 mask=None, int threshold=50, int trunc=200):
    """Fill ``out[i]`` with PG(b[i], psi[i]) for every i with ``mask[i]`` set."""
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t i
    cdef bitgen_t* bg = _bitgen(rng)
    cdef const unsigned char[::1] m
    cdef bint use_mask = mask is not None
    cdef double v
    cdef Py_ssize_t failed = -1
    if b.shape[0] != n or psi.shape[0] != n:
        raise ValueError("b, psi and out must have equal length")
    if use_mask:
        m = np.ascontiguousarray(mask, dtype=np.uint8)
    else:
        m = np.ones(n, dtype=np.uint8)
    for i in range(n):
        if m[i] and not b[i] > 0.0:
            raise ValueError(f"PG shape must be positive, got {b[i]} at index {i}")
    with rng.bit_generator.lock, nogil:
        for i in range(n):
            if m[i]:
                v = _pg(b[i], psi[i], threshold, trunc, bg)
                if v < 0.0:
                    failed = i
                    break
                out[i] = v
    if failed >= 0:
        raise PGSamplerError(f"PG({b[failed]}, {psi[failed]}) exceeded {MAX_PROPOSALS} proposals")
    return np.asarray(out)


# ---------------------------------------------------------------------------
# small dense linear algebra on P x P blocks

cdef int _chol_psd(double[:, ::1] a, double[:, ::1] l, Py_ssize_t p) noexcept nogil:
    cdef double scale = 1e-300
    cdef double tol, s, d, v
    cdef Py_ssize_t i, j, k
    for j in range(p):
        if fabs(a[j, j]) > scale:
            scale = fabs(a[j, j])
    tol = PSD_RTOL * scale
    for i in range(p):
        for j in range(p):
            l[i, j] = 0.0
    for j in range(p):
        s = a[j, j]
        for k in range(j):
            s -= l[j, k] * l[j, k]
        if s > tol:
            d = sqrt(s)
            l[j, j] = d
            for i in range(j + 1, p):
                v = a[i, j]
                for k in range(j):
                    v -= l[i, k] * l[j, k]
                l[i, j] = v / d
        elif s < -tol:
            return NOT_PSD
    return OK


cdef void _matmul(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out, Py_ssize_t p) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(p):
        for j in range(p):
            s = 0.0
            for k in range(p):
                s += a[i, k] * b[k, j]
            out[i, j] = s


cdef void _matmul_bt(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out, Py_ssize_t p) noexcept nogil:
    # out = a @ b.T
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(p):
        for j in range(p):
            s = 0.0
            for k in range(p):
                s += a[i, k] * b[j, k]
            out[i, j] = s


cdef void _matmul_w(double[:, ::1] a, const double[:, ::1] b, double[:, ::1] out, Py_ssize_t p) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(p):
        for j in range(p):
            s = 0.0
            for k in range(p):
                s += a[i, k] * b[k, j]
            out[i, j] = s


cdef void _symmetrize(double[:, ::1] a, Py_ssize_t p) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(p):
        for j in range(i + 1, p):
            v = 0.5 * (a[i, j] + a[j, i])
            a[i, j] = v
            a[j, i] = v


cdef int _filter(const double[::1] z, const double[::1] prec, const double[:, ::1] x,
                 const unsigned char[::1] observed, const double[::1] mu,
                 const double[:, ::1] phi, const double[:, ::1] w, const double[::1] m0,
                 const double[:, ::1] c0, bint phi_diag,
                 double[:, ::1] m, double[:, :, ::1] c, double[:, ::1] a, double[:, :, ::1] r,
                 double[:, ::1] tmp, double[::1] dev, double[::1] rx,
                 double* loglik, Py_ssize_t* bad_step) noexcept nogil:
    cdef Py_ssize_t t_len = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    cdef Py_ssize_t t, i, j, k
    cdef double s, q, f, e
    loglik[0] = 0.0
    for t in range(t_len):
        if t == 0:
            for i in range(p):
                a[0, i] = m0[i]
                for j in range(p):
                    r[0, i, j] = c0[i, j]
        else:
            for i in range(p):
                dev[i] = m[t - 1, i] - mu[i]
            if phi_diag:
                for i in range(p):
                    a[t, i] = mu[i] + phi[i, i] * dev[i]
                    for j in range(p):
                        r[t, i, j] = phi[i, i] * c[t - 1, i, j] * phi[j, j] + w[i, j]
            else:
                for i in range(p):
                    s = 0.0
                    for k in range(p):
                        s += phi[i, k] * dev[k]
                    a[t, i] = mu[i] + s
                # tmp = phi @ C
                for i in range(p):
                    for j in range(p):
                        s = 0.0
                        for k in range(p):
                            s += phi[i, k] * c[t - 1, k, j]
                        tmp[i, j] = s
                for i in range(p):
                    for j in range(p):
                        s = 0.0
                        for k in range(p):
                            s += tmp[i, k] * phi[j, k]
                        r[t, i, j] = s + w[i, j]
        _symmetrize(r[t], p)
        if observed[t]:
            f = 0.0
            q = 0.0
            for i in range(p):
                s = 0.0
                for j in range(p):
                    s += r[t, i, j] * x[t, j]
                rx[i] = s
                f += x[t, i] * a[t, i]
                q += x[t, i] * s
            q += 1.0 / prec[t]
            if not q > 0.0:
                bad_step[0] = t
                return BAD_Q
            e = z[t] - f
            for i in range(p):
                m[t, i] = a[t, i] + rx[i] * (e / q)
                for j in range(p):
                    c[t, i, j] = r[t, i, j] - rx[i] * rx[j] / q
            _symmetrize(c[t], p)
            loglik[0] -= 0.5 * (log(2.0 * M_PI * q) + e * e / q)
        else:
            for i in range(p):
                m[t, i] = a[t, i]
                for j in range(p):
                    c[t, i, j] = r[t, i, j]
    return OK


def ffbs_filter(const double[::1] z, const double[::1] prec, const double[:, ::1] x,
                observed, const double[::1] mu, const double[:, ::1] phi,
                const double[:, ::1] w, const double[::1] m0, const double[:, ::1] c0):
    cdef Py_ssize_t t_len = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    cdef const unsigned char[::1] obs = np.ascontiguousarray(observed, dtype=np.uint8)
    m = np.empty((t_len, p))
    c = np.empty((t_len, p, p))
    a = np.empty((t_len, p))
    r = np.empty((t_len, p, p))
    cdef double[:, ::1] tmp = np.empty((p, p))
    cdef double[::1] dev = np.empty(p)
    cdef double[::1] rx = np.empty(p)
    cdef double loglik = 0.0
    cdef Py_ssize_t bad = -1
    cdef bint phi_diag = _is_diag(phi)
    cdef int status
    status = _filter(z, prec, x, obs, mu, phi, w, m0, c0, phi_diag, m, c, a, r,
                     tmp, dev, rx, &loglik, &bad)
    if status != OK:
        raise FilterBreakdownError(f"non-positive predictive variance at step {bad}")
    return m, c, a, r, loglik


cdef bint _is_diag(const double[:, ::1] phi):
    cdef Py_ssize_t i, j
    for i in range(phi.shape[0]):
        for j in range(phi.shape[1]):
            if i != j and phi[i, j] != 0.0:
                return False
    return True


cdef int _backward(double[:, ::1] m, double[:, :, ::1] c, double[:, ::1] a,
                   double[:, :, ::1] r, const double[:, ::1] phi, const double[:, ::1] w,
                   bint phi_diag, bitgen_t* bg, double[:, ::1] beta,
                   double[:, ::1] lmat, double[:, ::1] g, double[:, ::1] j_,
                   double[:, ::1] bmat, double[:, ::1] tmp, double[:, ::1] hcov,
                   double[::1] eps, double[::1] dev, Py_ssize_t* bad_step) noexcept nogil:
    cdef Py_ssize_t t_len = m.shape[0]
    cdef Py_ssize_t p = m.shape[1]
    cdef Py_ssize_t t, i, jj, k, col
    cdef double s
    for i in range(p):
        eps[i] = random_standard_normal(bg)
    if _chol_psd(c[t_len - 1], lmat, p) != OK:
        bad_step[0] = t_len - 1
        return NOT_PSD
    for i in range(p):
        s = m[t_len - 1, i]
        for k in range(i + 1):
            s += lmat[i, k] * eps[k]
        beta[t_len - 1, i] = s
    for t in range(t_len - 2, -1, -1):
        bad_step[0] = t
        if _chol_psd(r[t + 1], lmat, p) != OK:
            return NOT_PSD
        for i in range(p):
            if lmat[i, i] == 0.0:
                return SINGULAR
        # g = phi @ C_t
        if phi_diag:
            for i in range(p):
                for jj in range(p):
                    g[i, jj] = phi[i, i] * c[t, i, jj]
        else:
            for i in range(p):
                for jj in range(p):
                    s = 0.0
                    for k in range(p):
                        s += phi[i, k] * c[t, k, jj]
                    g[i, jj] = s
        # solve L L' X = g column by column; X = J'
        for col in range(p):
            for i in range(p):
                s = g[i, col]
                for k in range(i):
                    s -= lmat[i, k] * tmp[k, col]
                tmp[i, col] = s / lmat[i, i]
            for i in range(p - 1, -1, -1):
                s = tmp[i, col]
                for k in range(i + 1, p):
                    s -= lmat[k, i] * j_[col, k]
                j_[col, i] = s / lmat[i, i]
        # h = m_t + J (beta_{t+1} - a_{t+1})
        for i in range(p):
            dev[i] = beta[t + 1, i] - a[t + 1, i]
        # B = I - J phi
        if phi_diag:
            for i in range(p):
                for jj in range(p):
                    bmat[i, jj] = (1.0 if i == jj else 0.0) - j_[i, jj] * phi[jj, jj]
        else:
            for i in range(p):
                for jj in range(p):
                    s = 0.0
                    for k in range(p):
                        s += j_[i, k] * phi[k, jj]
                    bmat[i, jj] = (1.0 if i == jj else 0.0) - s
        # hcov = B C B' + J W J'
        _matmul(bmat, c[t], tmp, p)
        _matmul_bt(tmp, bmat, hcov, p)
        _matmul_w(j_, w, tmp, p)
        for i in range(p):
            for jj in range(p):
                s = 0.0
                for k in range(p):
                    s += tmp[i, k] * j_[jj, k]
                hcov[i, jj] += s
        _symmetrize(hcov, p)
        if _chol_psd(hcov, lmat, p) != OK:
            return NOT_PSD
        for i in range(p):
            eps[i] = random_standard_normal(bg)
        for i in range(p):
            s = m[t, i]
            for k in range(p):
                s += j_[i, k] * dev[k]
            for k in range(i + 1):
                s += lmat[i, k] * eps[k]
            beta[t, i] = s
    return OK


def ffbs_backward(double[:, ::1] m, double[:, :, ::1] c, double[:, ::1] a,
                  double[:, :, ::1] r, const double[:, ::1] phi, const double[:, ::1] w, rng):
    cdef Py_ssize_t t_len = m.shape[0]
    cdef Py_ssize_t p = m.shape[1]
    beta = np.empty((t_len, p))
    cdef double[:, ::1] beta_v = beta
    cdef double[:, ::1] lmat = np.zeros((p, p))
    cdef double[:, ::1] g = np.empty((p, p))
    cdef double[:, ::1] j_ = np.empty((p, p))
    cdef double[:, ::1] bmat = np.empty((p, p))
    cdef double[:, ::1] tmp = np.empty((p, p))
    cdef double[:, ::1] hcov = np.empty((p, p))
    cdef double[::1] eps = np.empty(p)
    cdef double[::1] dev = np.empty(p)
    cdef bitgen_t* bg = _bitgen(rng)
    cdef bint phi_diag = _is_diag(phi)
    cdef Py_ssize_t bad = -1
    cdef int status
    with rng.bit_generator.lock, nogil:
        status = _backward(m, c, a, r, phi, w, phi_diag, bg, beta_v, lmat, g, j_,
                           bmat, tmp, hcov, eps, dev, &bad)
    _raise_backward(status, bad)
    return beta


cdef _raise_backward(int status, Py_ssize_t bad):
    if status == NOT_PSD:
        raise FilterBreakdownError(f"matrix not positive semi-definite at step {bad}")
    if status == SINGULAR:
        raise FilterBreakdownError(f"singular one-step covariance at step {bad + 1}")


def ffbs_draw(const double[::1] z, const double[::1] prec, const double[:, ::1] x,
              observed, const double[::1] mu, const double[:, ::1] phi,
              const double[:, ::1] w, const double[::1] m0, const double[:, ::1] c0, rng):
    """Filter then draw one path; a single call for the Gibbs inner loop."""
    cdef Py_ssize_t t_len = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    cdef const unsigned char[::1] obs = np.ascontiguousarray(observed, dtype=np.uint8)
    cdef double[:, ::1] m = np.empty((t_len, p))
    cdef double[:, :, ::1] c = np.empty((t_len, p, p))
    cdef double[:, ::1] a = np.empty((t_len, p))
    cdef double[:, :, ::1] r = np.empty((t_len, p, p))
    beta = np.empty((t_len, p))
    cdef double[:, ::1] beta_v = beta
    cdef double[:, ::1] lmat = np.zeros((p, p))
    cdef double[:, ::1] g = np.empty((p, p))
    cdef double[:, ::1] j_ = np.empty((p, p))
    cdef double[:, ::1] bmat = np.empty((p, p))
    cdef double[:, ::1] tmp = np.empty((p, p))
    cdef double[:, ::1] hcov = np.empty((p, p))
    cdef double[::1] eps = np.empty(p)
    cdef double[::1] dev = np.empty(p)
    cdef double[::1] rx = np.empty(p)
    cdef double loglik = 0.0
    cdef bitgen_t* bg = _bitgen(rng)
    cdef bint phi_diag = _is_diag(phi)
    cdef Py_ssize_t bad = -1
    cdef int status
    status = _filter(z, prec, x, obs, mu, phi, w, m0, c0, phi_diag, m, c, a, r,
                     tmp, dev, rx, &loglik, &bad)
    if status != OK:
        raise FilterBreakdownError(f"non-positive predictive variance at step {bad}")
    with rng.bit_generator.lock, nogil:
        status = _backward(m, c, a, r, phi, w, phi_diag, bg, beta_v, lmat, g, j_,
                           bmat, tmp, hcov, eps, dev, &bad)
    _raise_backward(status, bad)
    return beta
