"""Pure-Python (numpy) implementations of the hot kernels.

This module mirrors ``_ckernels.pyx`` function for function. It is used
whenever the compiled extension is missing or ``A2DR_PURE_PYTHON`` is set.
The Jacobi routines here use the round-robin (parallel) pair ordering so
that each round is a single dense rotation; the compiled versions sweep
pairs cyclically. Both converge to the same decomposition.
"""
import math

import numpy as np
from scipy.special import expit

NAME = "python"


def coo_matvec(rows, cols, vals, x, m):
    y = np.zeros(m)
    # np.add.at accumulates sequentially in entry order.
    np.add.at(y, rows, vals * x[cols])
    return y


def coo_rmatvec(rows, cols, vals, y, n):
    x = np.zeros(n)
    np.add.at(x, cols, vals * y[rows])
    return x


def lsqr(rows, cols, vals, m, n, b, tol, max_iter):
    """Paige-Saunders LSQR for min ||Ax - b||_2 starting from x = 0.

    Returns ``(x, itn, rnorm)`` where ``rnorm`` is the recurrence estimate
    of the final residual norm.
    """
    x = np.zeros(n)
    u = np.array(b, dtype=float, copy=True)
    beta = math.sqrt(float(u @ u))
    if beta == 0.0:
        return x, 0, 0.0
    u /= beta
    v = coo_rmatvec(rows, cols, vals, u, n)
    alpha = math.sqrt(float(v @ v))
    if alpha == 0.0:
        return x, 0, beta
    v /= alpha
    w = v.copy()

    bnorm = beta
    anorm = 0.0
    phibar = beta
    rhobar = alpha
    rnorm = beta
    itn = 0
    while itn < max_iter:
        itn += 1
        u = coo_matvec(rows, cols, vals, v, m) - alpha * u
        beta = math.sqrt(float(u @ u))
        if beta > 0.0:
            u /= beta
            anorm = math.sqrt(anorm * anorm + alpha * alpha + beta * beta)
            v = coo_rmatvec(rows, cols, vals, u, n) - beta * v
            alpha = math.sqrt(float(v @ v))
            if alpha > 0.0:
                v /= alpha
        else:
            anorm = math.sqrt(anorm * anorm + alpha * alpha)

        rho = math.hypot(rhobar, beta)
        c = rhobar / rho
        s = beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar
        tau = s * phi

        x += (phi / rho) * w
        w = v - (theta / rho) * w

        rnorm = phibar
        arnorm = alpha * abs(tau)
        xnorm = math.sqrt(float(x @ x))
        test1 = rnorm / bnorm
        test2 = arnorm / (anorm * rnorm) if anorm * rnorm > 0.0 else 0.0
        if test1 <= tol + tol * anorm * xnorm / bnorm or test2 <= tol:
            break
        if alpha == 0.0 or beta == 0.0:
            break
    return x, itn, rnorm


def _round_robin(n):
    """Pairings for a round-robin tournament on ``n`` players (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        pairs = [(players[i], players[n - 1 - i]) for i in range(n // 2)]
        rounds.append(pairs)
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _rotation(tau):
    with np.errstate(over="ignore"):
        tau2 = tau * tau
    t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau2))
    c = 1.0 / np.sqrt(1.0 + t * t)
    return c, t * c


def jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by Jacobi rotations.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    as columns.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    if n == 1:
        return a[0].copy(), np.ones((1, 1))
    npad = n + (n % 2)
    rounds = [
        [(p, q) for p, q in pairs if p < n and q < n] for pairs in _round_robin(npad)
    ]
    rounds = [
        (np.array([min(p, q) for p, q in r]), np.array([max(p, q) for p, q in r]))
        for r in rounds
        if r
    ]
    v = np.eye(n)
    fro = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * fro:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            with np.errstate(over="ignore"):
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            c, s = _rotation(tau)
            j = np.eye(n)
            j[p, p] = c
            j[q, q] = c
            j[p, q] = s
            j[q, p] = -s
            a = j.T @ a @ j
            # Rounding makes a drift off symmetric; the antisymmetric part is
            # invisible to the rotations, so remove it.
            a = 0.5 * (a + a.T)
            v = v @ j
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def jacobi_svd(m, tol=1e-12, max_sweeps=100):
    """Thin SVD by one-sided (Hestenes) Jacobi.

    Returns ``(u, s, vt)`` with singular values in descending order; columns
    of ``u`` belonging to zero singular values are zero.
    """
    m = np.array(m, dtype=float)
    transposed = m.shape[0] < m.shape[1]
    w = (m.T if transposed else m).copy()
    n = w.shape[1]
    v = np.eye(n)
    if n > 1:
        npad = n + (n % 2)
        rounds = [
            [(p, q) for p, q in pairs if p < n and q < n]
            for pairs in _round_robin(npad)
        ]
        rounds = [
            (np.array([min(p, q) for p, q in r]), np.array([max(p, q) for p, q in r]))
            for r in rounds
            if r
        ]
        for _ in range(max_sweeps):
            rotated = False
            for p, q in rounds:
                alpha = np.einsum("ij,ij->j", w[:, p], w[:, p])
                beta = np.einsum("ij,ij->j", w[:, q], w[:, q])
                gamma = np.einsum("ij,ij->j", w[:, p], w[:, q])
                active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
                if not active.any():
                    continue
                rotated = True
                p, q = p[active], q[active]
                with np.errstate(over="ignore"):
                    zeta = (beta[active] - alpha[active]) / (2.0 * gamma[active])
                c, s = _rotation(zeta)
                j = np.eye(n)
                j[p, p] = c
                j[q, q] = c
                j[p, q] = s
                j[q, p] = -s
                w = w @ j
                v = v @ j
            if not rotated:
                break
    s = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-s, kind="stable")
    s = s[order]
    w = w[:, order]
    v = v[:, order]
    u = np.zeros_like(w)
    nz = s > 0
    u[:, nz] = w[:, nz] / s[nz]
    if transposed:
        return v, s, u.T
    return u, s, v.T


def logistic_prox(v, t, y, tol=1e-12, max_iter=100):
    """Elementwise argmin of log(1 + exp(-y x)) + (x - v)^2 / (2t)."""
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    lo = np.minimum(v, v + y * t)
    hi = np.maximum(v, v + y * t)
    x = v + y * t * expit(-y * v)
    x = np.clip(x, lo, hi)
    todo = np.ones(v.shape, dtype=bool)
    for _ in range(max_iter):
        sig = expit(-y * x)
        g = -y * sig + (x - v) / t
        h = sig * (1.0 - sig) + 1.0 / t
        done = np.abs(g) <= tol
        done |= (hi - lo) <= 4.0 * np.finfo(float).eps * np.maximum(np.abs(x), 1.0)
        todo &= ~done
        if not todo.any():
            break
        hi = np.where(todo & (g > 0), x, hi)
        lo = np.where(todo & (g < 0), x, lo)
        step = x - g / h
        outside = (step <= lo) | (step >= hi)
        step = np.where(outside, 0.5 * (lo + hi), step)
        x = np.where(todo, step, x)
    return x
