# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: COO mat-vecs, LSQR, Jacobi eigen/SVD, logistic prox.

Signatures and return conventions match ``_pykernels``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, hypot, exp

cnp.import_array()

NAME = "cython"

ctypedef cnp.int64_t idx_t


cdef void _matvec(const idx_t[::1] rows, const idx_t[::1] cols,
                  const double[::1] vals, const double[::1] x,
                  double[::1] y) noexcept nogil:
    cdef Py_ssize_t k, nnz = vals.shape[0]
    for k in range(y.shape[0]):
        y[k] = 0.0
    for k in range(nnz):
        y[rows[k]] += vals[k] * x[cols[k]]


cdef void _rmatvec(const idx_t[::1] rows, const idx_t[::1] cols,
                   const double[::1] vals, const double[::1] y,
                   double[::1] x) noexcept nogil:
    cdef Py_ssize_t k, nnz = vals.shape[0]
    for k in range(x.shape[0]):
        x[k] = 0.0
    for k in range(nnz):
        x[cols[k]] += vals[k] * y[rows[k]]


cdef double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t k
    cdef double s = 0.0
    for k in range(a.shape[0]):
        s += a[k] * b[k]
    return s


def coo_matvec(const idx_t[::1] rows, const idx_t[::1] cols,
               const double[::1] vals, const double[::1] x, Py_ssize_t m):
    out = np.zeros(m)
    cdef double[::1] y = out
    with nogil:
        _matvec(rows, cols, vals, x, y)
    return out


def coo_rmatvec(const idx_t[::1] rows, const idx_t[::1] cols,
                const double[::1] vals, const double[::1] y, Py_ssize_t n):
    out = np.zeros(n)
    cdef double[::1] x = out
    with nogil:
        _rmatvec(rows, cols, vals, y, x)
    return out


def lsqr(const idx_t[::1] rows, const idx_t[::1] cols, const double[::1] vals,
         Py_ssize_t m, Py_ssize_t n, const double[::1] b, double tol,
         Py_ssize_t max_iter):
    x_arr = np.zeros(n)
    cdef double[::1] x = x_arr
    if m == 0 or n == 0:
        return x_arr, 0, sqrt(_dot(b, b)) if m > 0 else 0.0
    cdef double[::1] u = np.array(b, dtype=np.float64, copy=True)
    cdef double[::1] v = np.zeros(n)
    cdef double[::1] w = np.zeros(n)
    cdef double[::1] tmp_m = np.zeros(m)
    cdef double[::1] tmp_n = np.zeros(n)
    cdef double alpha, beta, bnorm, anorm, phibar, rhobar, rnorm
    cdef double rho, c, s, theta, phi, tau, arnorm, xnorm, test1, test2
    cdef Py_ssize_t i, itn = 0

    with nogil:
        beta = sqrt(_dot(u, u))
        if beta == 0.0:
            rnorm = 0.0
        else:
            for i in range(m):
                u[i] /= beta
            _rmatvec(rows, cols, vals, u, v)
            alpha = sqrt(_dot(v, v))
            rnorm = beta
            if alpha > 0.0:
                for i in range(n):
                    v[i] /= alpha
                    w[i] = v[i]
                bnorm = beta
                anorm = 0.0
                phibar = beta
                rhobar = alpha
                while itn < max_iter:
                    itn += 1
                    _matvec(rows, cols, vals, v, tmp_m)
                    for i in range(m):
                        u[i] = tmp_m[i] - alpha * u[i]
                    beta = sqrt(_dot(u, u))
                    if beta > 0.0:
                        for i in range(m):
                            u[i] /= beta
                        anorm = sqrt(anorm * anorm + alpha * alpha + beta * beta)
                        _rmatvec(rows, cols, vals, u, tmp_n)
                        for i in range(n):
                            v[i] = tmp_n[i] - beta * v[i]
                        alpha = sqrt(_dot(v, v))
                        if alpha > 0.0:
                            for i in range(n):
                                v[i] /= alpha
                    else:
                        anorm = sqrt(anorm * anorm + alpha * alpha)

                    rho = hypot(rhobar, beta)
                    c = rhobar / rho
                    s = beta / rho
                    theta = s * alpha
                    rhobar = -c * alpha
                    phi = c * phibar
                    phibar = s * phibar
                    tau = s * phi

                    for i in range(n):
                        x[i] += (phi / rho) * w[i]
                        w[i] = v[i] - (theta / rho) * w[i]

                    rnorm = phibar
                    arnorm = alpha * fabs(tau)
                    xnorm = sqrt(_dot(x, x))
                    test1 = rnorm / bnorm
                    if anorm * rnorm > 0.0:
                        test2 = arnorm / (anorm * rnorm)
                    else:
                        test2 = 0.0
                    if test1 <= tol + tol * anorm * xnorm / bnorm or test2 <= tol:
                        break
                    if alpha == 0.0 or beta == 0.0:
                        break
    return x_arr, itn, rnorm


cdef inline void _rot(double tau, double* c, double* s) noexcept nogil:
    cdef double t
    if tau >= 0:
        t = 1.0 / (tau + sqrt(1.0 + tau * tau))
    else:
        t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
    c[0] = 1.0 / sqrt(1.0 + t * t)
    s[0] = t * c[0]


def jacobi_eigh(a_in, double tol=1e-12, Py_ssize_t max_sweeps=100):
    a_arr = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a_arr.shape[0]
    v_arr = np.eye(n)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, k, sweep
    cdef double fro = 0.0, off, apq, c, s, x, y
    for p in range(n):
        for q in range(n):
            fro += a[p, q] * a[p, q]
    fro = sqrt(fro)
    with nogil:
        for sweep in range(max_sweeps):
            off = 0.0
            for p in range(n):
                for q in range(n):
                    if p != q:
                        off += a[p, q] * a[p, q]
            if sqrt(off) <= tol * fro:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    _rot((a[q, q] - a[p, p]) / (2.0 * apq), &c, &s)
                    for k in range(n):
                        x = a[k, p]
                        y = a[k, q]
                        a[k, p] = c * x - s * y
                        a[k, q] = s * x + c * y
                    for k in range(n):
                        x = a[p, k]
                        y = a[q, k]
                        a[p, k] = c * x - s * y
                        a[q, k] = s * x + c * y
                    for k in range(n):
                        x = v[k, p]
                        y = v[k, q]
                        v[k, p] = c * x - s * y
                        v[k, q] = s * x + c * y
    w = np.diag(a_arr).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v_arr[:, order]


def jacobi_svd(m_in, double tol=1e-12, Py_ssize_t max_sweeps=100):
    m_arr = np.asarray(m_in, dtype=np.float64)
    transposed = m_arr.shape[0] < m_arr.shape[1]
    # Work on columns of the transposed copy so each column is contiguous.
    wt_arr = np.array(m_arr if transposed else m_arr.T, dtype=np.float64, order="C")
    cdef Py_ssize_t n = wt_arr.shape[0], r = wt_arr.shape[1]
    vt_arr = np.eye(n)
    cdef double[:, ::1] wt = wt_arr
    cdef double[:, ::1] vt = vt_arr
    cdef Py_ssize_t p, q, k, sweep
    cdef double alpha, beta, gamma, c, s, x, y
    cdef bint rotated
    with nogil:
        for sweep in range(max_sweeps):
            rotated = False
            for p in range(n - 1):
                for q in range(p + 1, n):
                    alpha = 0.0
                    beta = 0.0
                    gamma = 0.0
                    for k in range(r):
                        alpha += wt[p, k] * wt[p, k]
                        beta += wt[q, k] * wt[q, k]
                        gamma += wt[p, k] * wt[q, k]
                    if not fabs(gamma) > tol * sqrt(alpha * beta):
                        continue
                    rotated = True
                    _rot((beta - alpha) / (2.0 * gamma), &c, &s)
                    for k in range(r):
                        x = wt[p, k]
                        y = wt[q, k]
                        wt[p, k] = c * x - s * y
                        wt[q, k] = s * x + c * y
                    for k in range(n):
                        x = vt[p, k]
                        y = vt[q, k]
                        vt[p, k] = c * x - s * y
                        vt[q, k] = s * x + c * y
            if not rotated:
                break
    w = wt_arr.T
    vmat = vt_arr.T
    sv = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    w = w[:, order]
    vmat = vmat[:, order]
    u = np.zeros_like(w)
    nz = sv > 0
    u[:, nz] = w[:, nz] / sv[nz]
    if transposed:
        return vmat, sv, u.T
    return u, sv, vmat.T


cdef inline double _expit(double z) noexcept nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def logistic_prox(v_in, double t, y_in, double tol=1e-12, Py_ssize_t max_iter=100):
    cdef const double[::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    out = np.empty(v.shape[0])
    cdef double[::1] x_out = out
    cdef Py_ssize_t i, it, n = v.shape[0]
    cdef double lo, hi, x, sig, g, h, step, vi, yi, scale
    cdef double eps = np.finfo(np.float64).eps
    with nogil:
        for i in range(n):
            vi = v[i]
            yi = y[i]
            lo = vi if yi * t >= 0 else vi + yi * t
            hi = vi + yi * t if yi * t >= 0 else vi
            x = vi + yi * t * _expit(-yi * vi)
            if x < lo:
                x = lo
            if x > hi:
                x = hi
            for it in range(max_iter):
                sig = _expit(-yi * x)
                g = -yi * sig + (x - vi) / t
                if fabs(g) <= tol:
                    break
                scale = fabs(x) if fabs(x) > 1.0 else 1.0
                if hi - lo <= 4.0 * eps * scale:
                    break
                h = sig * (1.0 - sig) + 1.0 / t
                if g > 0:
                    hi = x
                else:
                    lo = x
                step = x - g / h
                if step <= lo or step >= hi:
                    step = 0.5 * (lo + hi)
                x = step
            x_out[i] = x
    return out
