"""Reference solutions computed by methods unrelated to the splitting solver.

These are dense, small-scale oracles meant for tests:

* accelerated projected gradient for nonnegative least squares;
* a primal-dual interior-point method for convex QPs (trend filtering via
  its box-constrained dual, commodity flow, optimal control, coupled QPs);
* projected gradient ascent on the dual for sparse inverse covariance,
  stopped on a duality-gap certificate;
* three-operator (Davis-Yin) splitting for multi-task logistic regression.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = [
    "Reference",
    "nnls_reference",
    "qp_interior_point",
    "trend_reference",
    "inv_cov_reference",
    "multitask_reference",
    "reference_solution",
]


@dataclass
class Reference:
    x_blocks: list
    objective: float
    info: dict = field(default_factory=dict)


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def nnls_reference(F, g, tol=1e-12, max_iter=200000):
    """``argmin ||F z - g||^2  s.t. z >= 0`` by FISTA with adaptive restart."""
    F = _dense(F)
    g = np.asarray(g, dtype=float)
    n = F.shape[1]
    lip = 2.0 * np.linalg.norm(F, 2) ** 2
    if lip == 0.0:
        return np.zeros(n), float(g @ g), 0
    z = np.zeros(n)
    w = z.copy()
    theta = 1.0
    for it in range(1, max_iter + 1):
        grad = 2.0 * F.T @ (F @ w - g)
        z_new = np.maximum(w - grad / lip, 0.0)
        # Projected-gradient optimality measure at z_new.
        full = 2.0 * F.T @ (F @ z_new - g)
        kkt = np.linalg.norm(np.minimum(z_new, full), np.inf) if n else 0.0
        if kkt <= tol * max(1.0, np.abs(full).max(initial=0.0)):
            z = z_new
            break
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta**2))
        if (z_new - z) @ (w - z_new) > 0:  # restart on a non-descent direction
            theta_new = 1.0
            w = z_new
        else:
            w = z_new + (theta - 1.0) / theta_new * (z_new - z)
        z, theta = z_new, theta_new
    r = F @ z - g
    return z, float(r @ r), it


def qp_interior_point(P, c, G=None, h=None, A=None, b=None, tol=1e-10, max_iter=200):
    """``minimize x'Px/2 + c'x  s.t.  G x <= h,  A x = b`` (dense).

    Mehrotra predictor-corrector on the reduced Newton system. Returns
    ``(x, y, z, iterations)`` with ``y`` and ``z`` the equality and
    inequality multipliers. Raises ``RuntimeError`` if it does not converge.
    """
    P = _dense(P)
    n = P.shape[0]
    c = np.asarray(c, dtype=float)
    G = np.zeros((0, n)) if G is None else _dense(G)
    h = np.zeros(0) if h is None else np.asarray(h, dtype=float)
    A = np.zeros((0, n)) if A is None else _dense(A)
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float)
    mi, me = G.shape[0], A.shape[0]
    x = np.zeros(n)
    y = np.zeros(me)
    s = np.ones(mi)
    z = np.ones(mi)
    scale = 1.0 + max(np.abs(c).max(initial=0), np.abs(h).max(initial=0), np.abs(b).max(initial=0))

    def solve_newton(rd, rp, rg, rc):
        # Eliminate ds, dz: dz = (z * (rg + G dx) - rc) / s.
        wgt = z / s
        H = P + G.T @ (wgt[:, None] * G)
        rhs_x = -rd - G.T @ ((z * rg - rc) / s)
        K = np.block([[H, A.T], [A, -1e-14 * np.eye(me)]]) if me else H
        rhs = np.concatenate([rhs_x, -rp])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        dx, dy = sol[:n], sol[n:]
        ds = -rg - G @ dx
        dz = (-rc - z * ds) / s
        return dx, dy, ds, dz

    def step_to_boundary(v, dv):
        neg = dv < 0
        return min(1.0, float(np.min(-v[neg] / dv[neg]))) if neg.any() else 1.0

    for it in range(1, max_iter + 1):
        rd = P @ x + c + G.T @ z + A.T @ y
        rp = A @ x - b
        rg = G @ x + s - h
        mu = float(s @ z) / mi if mi else 0.0
        if max(np.abs(rd).max(initial=0), np.abs(rp).max(initial=0),
               np.abs(rg).max(initial=0)) <= tol * scale and mu <= tol * scale:
            return x, y, z, it
        dx, dy, ds, dz = solve_newton(rd, rp, rg, s * z)
        if mi:
            a_aff = min(step_to_boundary(s, ds), step_to_boundary(z, dz))
            mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / mi
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            rc = s * z + ds * dz - sigma * mu
            dx, dy, ds, dz = solve_newton(rd, rp, rg, rc)
            alpha = 0.99 * min(step_to_boundary(s, ds), step_to_boundary(z, dz))
            alpha = min(alpha, 1.0)
        else:
            alpha = 1.0
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
    raise RuntimeError("interior-point method did not converge")


def _bounds(lo, hi, n, offset, total):
    """Inequality rows for finite bounds and equality rows for fixed entries."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), n)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), n)
    fixed = lo == hi
    G_rows, h_rows, A_rows, b_rows = [], [], [], []
    for i in range(n):
        e = np.zeros(total)
        e[offset + i] = 1.0
        if fixed[i]:
            A_rows.append(e)
            b_rows.append(lo[i])
            continue
        if np.isfinite(hi[i]):
            G_rows.append(e)
            h_rows.append(hi[i])
        if np.isfinite(lo[i]):
            G_rows.append(-e)
            h_rows.append(-lo[i])
    return G_rows, h_rows, A_rows, b_rows


def _stack_rows(rows, total):
    return np.array(rows).reshape(-1, total)


def trend_reference(y, alpha, D=None):
    """``argmin 0.5 ||y - z||^2 + alpha ||D z||_1`` through the box-constrained dual.

    The dual is ``minimize 0.5 ||y - D'u||^2  s.t. |u| <= alpha`` and
    ``z = y - D'u``.
    """
    from .generators import second_difference

    y = np.asarray(y, dtype=float)
    q = y.size
    D = _dense(second_difference(q) if D is None else D)
    k = D.shape[0]
    if alpha == 0.0:
        z = y.copy()
    else:
        P = D @ D.T
        G = np.vstack([np.eye(k), -np.eye(k)])
        h = np.full(2 * k, float(alpha))
        u = qp_interior_point(P, -D @ y, G, h)[0]
        z = y - D.T @ u
    w = D @ z
    obj = 0.5 * float((y - z) @ (y - z)) + alpha * float(np.abs(w).sum())
    return z, w, obj


def inv_cov_reference(Q, alpha, tol=1e-10, max_iter=20000):
    """``argmin -log det S + tr(S Q) + alpha ||S||_1`` by dual projected gradient.

    The dual variable ``U`` ranges over ``|U_ij| <= alpha`` and
    ``S = (Q + U)^{-1}``. The gap ``alpha ||S||_1 - tr(S U)`` certifies
    optimality.
    """
    Q = np.asarray(Q, dtype=float)
    q = Q.shape[0]
    U = np.zeros_like(Q)

    def dual(U):
        try:
            L = np.linalg.cholesky(Q + U)
        except np.linalg.LinAlgError:
            return -np.inf, None
        return 2.0 * np.log(np.diag(L)).sum() + q, L

    d_val, L = dual(U)
    if L is None:
        raise ValueError("Q must be positive definite when alpha is small")
    step = 1.0
    gap = np.inf
    for it in range(1, max_iter + 1):
        S = sla.cho_solve((L, True), np.eye(q))
        S = 0.5 * (S + S.T)
        gap = alpha * np.abs(S).sum() - float(np.sum(S * U))
        primal = 2.0 * np.log(np.diag(L)).sum() + float(np.sum(S * Q)) + alpha * np.abs(S).sum()
        if gap <= tol * max(1.0, abs(primal)):
            break
        while True:
            U_new = np.clip(U + step * S, -alpha, alpha)
            new_val, L_new = dual(U_new)
            diff = U_new - U
            if L_new is not None and new_val >= d_val + np.sum(S * diff) - np.sum(diff * diff) / (2 * step):
                break
            step *= 0.5
            if step < 1e-20:
                raise RuntimeError("dual line search failed")
        U, d_val, L = U_new, new_val, L_new
        step *= 2.0
    S = sla.cho_solve((L, True), np.eye(q))
    S = 0.5 * (S + S.T)
    _, logdet = np.linalg.slogdet(S)
    obj = -logdet + float(np.sum(S * Q)) + alpha * float(np.abs(S).sum())
    return S, obj, gap


def _logistic_loss(z, y):
    return float(np.logaddexp(0.0, -y * z).sum())


def multitask_reference(W, Y, alpha, beta, tol=1e-11, max_iter=200000):
    """Multi-task logistic regression by Davis-Yin splitting.

    Smooth part ``sum logistic(-Y * W theta)``; the two nonsmooth parts are
    the column group lasso and the nuclear norm, both with closed-form proxes.
    """
    W = np.asarray(W, dtype=float)
    Y = np.asarray(Y, dtype=float)
    s, L = W.shape[1], Y.shape[1]
    step = 1.0 / (np.linalg.norm(W, 2) ** 2 / 4.0)

    def grad(theta):
        z = W @ theta
        return W.T @ (-Y * np.exp(-np.logaddexp(0.0, Y * z)))

    def prox_group(V, t):
        norms = np.linalg.norm(V, axis=0)
        shrink = np.maximum(1.0 - t * alpha / np.maximum(norms, 1e-300), 0.0)
        return V * shrink

    def prox_nuclear(V, t):
        U, sig, Vt = np.linalg.svd(V, full_matrices=False)
        return (U * np.maximum(sig - t * beta, 0.0)) @ Vt

    def objective(theta):
        _, sig, _ = np.linalg.svd(theta, full_matrices=False)
        return (_logistic_loss(W @ theta, Y) + alpha * np.linalg.norm(theta, axis=0).sum()
                + beta * sig.sum())

    zeta = np.zeros((s, L))
    for it in range(1, max_iter + 1):
        xg = prox_group(zeta, step)
        xn = prox_nuclear(2.0 * xg - zeta - step * grad(xg), step)
        diff = xn - xg
        zeta = zeta + diff
        if np.linalg.norm(diff) <= tol * max(1.0, np.linalg.norm(xg)):
            break
    theta = prox_group(zeta, step)
    return theta, objective(theta), it


def _qp_blocks(instance):
    fam, d = instance.family, instance.data
    if fam == "commodity_flow":
        B = _dense(d["B"])
        p, q = B.shape
        total = p + q
        P = np.diag(np.concatenate([2.0 * d["c"], 2.0 * d["source_weights"]]))
        Gz, hz, _, _ = _bounds(-d["x_max"], d["x_max"], q, 0, total)
        Gs, hs, As, bs = _bounds(d["s_lo"], d["s_hi"], p, q, total)
        A = np.vstack([np.hstack([B, np.eye(p)]), _stack_rows(As, total)])
        b = np.concatenate([np.zeros(p), bs])
        G = _stack_rows(Gz + Gs, total)
        h = np.array(hz + hs)
        x = qp_interior_point(P, np.zeros(total), G, h, A, b)[0]
        x[:q] = np.clip(x[:q], -d["x_max"], d["x_max"])
        x[q:] = np.clip(x[q:], d["s_lo"], d["s_hi"])
        return [x[:q], x[q:]]
    if fam == "optimal_control":
        Fb, Gb = _dense(d["F_tilde"]), _dense(d["G_tilde"])
        nz, nu = Fb.shape[1], Gb.shape[1]
        total = nz + nu
        G_rows, h_rows, _, _ = _bounds(-1.0, 1.0, nu, nz, total)
        x = qp_interior_point(2.0 * np.eye(total), np.zeros(total), _stack_rows(G_rows, total),
                              np.array(h_rows), np.hstack([Fb, Gb]), d["h_tilde"])[0]
        return [x[:nz], np.clip(x[nz:], -1.0, 1.0)]
    if fam == "coupled_qp":
        P = sla.block_diag(*[2.0 * Q for Q in d["Q"]])
        c = np.concatenate(d["c"])
        G = sla.block_diag(*d["F"]) if d["F"][0].size else None
        h = np.concatenate(d["d"]) if G is not None else None
        A = np.hstack(d["G"])
        x = qp_interior_point(P, c, G, h, A, d["h"])[0]
        sizes = np.cumsum([Q.shape[0] for Q in d["Q"]])[:-1]
        return np.split(x, sizes)
    raise ValueError(fam)


def reference_solution(instance) -> Reference:
    """Independent reference solution for a generated instance."""
    fam, d, prm = instance.family, instance.data, instance.params
    if fam == "nnls":
        z, obj, it = nnls_reference(d["F"], d["g"])
        return Reference([z, z.copy()], obj, {"iterations": it})
    if fam == "sparse_inv_cov":
        S, obj, gap = inv_cov_reference(d["Q"], prm["alpha"])
        v = S.ravel(order="F")
        return Reference([v, v.copy()], obj, {"gap": gap})
    if fam == "l1_trend":
        z, w, obj = trend_reference(d["y"], prm["alpha"], d["D"])
        return Reference([z, w], obj)
    if fam == "multitask_logistic":
        theta, obj, it = multitask_reference(d["W"], d["Y"], prm["alpha"], prm["beta"])
        z = (d["W"] @ theta).ravel(order="F")
        th = theta.ravel(order="F")
        return Reference([z, th, th.copy()], obj, {"iterations": it})
    blocks = _qp_blocks(instance)
    return Reference(blocks, instance.problem.objective(blocks))
