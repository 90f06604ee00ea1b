"""Proximal operators ``x = argmin f(x) + ||x - v||^2 / (2t)``.

Every operator exposes ``evaluate(v, t)`` (also available as ``__call__``),
``value(x)`` returning ``f(x)`` (``inf`` outside the domain), its dimension
``size`` and a ``kind`` name used by the problem file format.

Matrix-valued variables are stored as full column-major vectorizations.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from ._backend import kernels
from .sparsela import SparseMatrix, lsqr_solve

__all__ = [
    "ProxOperator",
    "Zero",
    "AffineIndicator",
    "Nonneg",
    "Box",
    "SoftThreshold",
    "QuadBox",
    "SumSquaresAffine",
    "NegLogDetTrace",
    "GroupLasso",
    "NuclearNorm",
    "Logistic",
    "QuadFormPolyhedron",
    "ScaledProx",
    "CustomProx",
    "wrap_scaled",
    "KINDS",
    "make_prox",
    "InfeasiblePolyhedronError",
]


class InfeasiblePolyhedronError(ValueError):
    """Raised when ``{x : F x <= d}`` is empty."""


def _vec(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.size != n:
        raise ValueError(f"expected a vector of length {n}, got {v.size}")
    return v


def _check_t(t: float) -> float:
    t = float(t)
    if not (t > 0 and np.isfinite(t)):
        raise ValueError("step size t must be positive and finite")
    return t


def _param_vector(x, n: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.full(n, float(x))
    x = x.ravel()
    if x.size != n:
        raise ValueError(f"{name} must be a scalar or have length {n}")
    return x


class ProxOperator:
    """Base class. Subclasses implement ``_evaluate`` and ``value``."""

    kind = "abstract"
    # Operators without a proper closed form for f (e.g. custom callables)
    # set this to False so that tests can skip value-based checks.
    has_value = True

    def __init__(self, size: int):
        size = int(size)
        if size < 0:
            raise ValueError("size must be nonnegative")
        self.size = size

    def evaluate(self, v, t: float) -> np.ndarray:
        return self._evaluate(_vec(v, self.size), _check_t(t))

    __call__ = evaluate

    def _evaluate(self, v: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def value(self, x) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        """Parameters needed to rebuild the operator, keyed by name."""
        return {}

    def reset(self) -> None:
        """Drop any warm-start state kept between calls."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}(size={self.size})"


class Zero(ProxOperator):
    """``f = 0``; the prox is the identity."""

    kind = "zero"

    def _evaluate(self, v, t):
        return v.copy()

    def value(self, x):
        return 0.0


class AffineIndicator(ProxOperator):
    """Indicator of the single point ``x = value``."""

    kind = "affine_indicator"

    def __init__(self, size: int, point=0.0):
        super().__init__(size)
        self.point = _param_vector(point, self.size, "point")

    def _evaluate(self, v, t):
        return self.point.copy()

    def value(self, x):
        x = _vec(x, self.size)
        return 0.0 if np.allclose(x, self.point, rtol=1e-9, atol=1e-9) else np.inf

    def params(self):
        return {"point": self.point}


class Nonneg(ProxOperator):
    """Indicator of the nonnegative orthant."""

    kind = "nonneg"

    def _evaluate(self, v, t):
        return np.maximum(v, 0.0)

    def value(self, x):
        x = _vec(x, self.size)
        return 0.0 if np.all(x >= -1e-9 * max(1.0, np.abs(x).max(initial=0.0))) else np.inf


class Box(ProxOperator):
    """Indicator of ``lo <= x <= hi``; bounds may be infinite."""

    kind = "box"

    def __init__(self, size: int, lo=-np.inf, hi=np.inf):
        super().__init__(size)
        self.lo = _param_vector(lo, self.size, "lo")
        self.hi = _param_vector(hi, self.size, "hi")
        if np.any(self.lo > self.hi):
            raise ValueError("lo must not exceed hi")

    def _evaluate(self, v, t):
        return np.clip(v, self.lo, self.hi)

    def value(self, x):
        x = _vec(x, self.size)
        slack = 1e-9 * np.maximum(1.0, np.abs(x))
        ok = np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack)
        return 0.0 if ok else np.inf

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


class SoftThreshold(ProxOperator):
    """``f(x) = alpha * ||x||_1``."""

    kind = "soft_threshold"

    def __init__(self, size: int, alpha: float = 1.0):
        super().__init__(size)
        self.alpha = float(alpha)
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    def _evaluate(self, v, t):
        return np.sign(v) * np.maximum(np.abs(v) - t * self.alpha, 0.0)

    def value(self, x):
        return self.alpha * float(np.abs(_vec(x, self.size)).sum())

    def params(self):
        return {"alpha": self.alpha}


class QuadBox(ProxOperator):
    """``f(x) = sum_i w_i x_i^2`` restricted to ``lo <= x <= hi``.

    Fixed entries use ``lo == hi``. With ``w = 0`` this is a box indicator.
    """

    kind = "quad_box"

    def __init__(self, size: int, weights=1.0, lo=-np.inf, hi=np.inf):
        super().__init__(size)
        self.weights = _param_vector(weights, self.size, "weights")
        self.lo = _param_vector(lo, self.size, "lo")
        self.hi = _param_vector(hi, self.size, "hi")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(self.lo > self.hi):
            raise ValueError("lo must not exceed hi")

    def _evaluate(self, v, t):
        return np.clip(v / (2.0 * t * self.weights + 1.0), self.lo, self.hi)

    def value(self, x):
        x = _vec(x, self.size)
        slack = 1e-9 * np.maximum(1.0, np.abs(x))
        if np.any(x < self.lo - slack) or np.any(x > self.hi + slack):
            return np.inf
        return float(self.weights @ (x * x))

    def params(self):
        return {"weights": self.weights, "lo": self.lo, "hi": self.hi}


class SumSquaresAffine(ProxOperator):
    """``f(x) = ||F x - g||_2^2``, evaluated by LSQR on a stacked system.

    The prox minimizes ``|| [F; I/sqrt(2t)] x - [g; v/sqrt(2t)] ||``. The
    stacked matrix is cached for the last ``t`` and LSQR is warm-started
    from the previous output.
    """

    kind = "sum_squares_affine"

    def __init__(self, F, g, tol: float = 1e-10):
        F = F if isinstance(F, SparseMatrix) else SparseMatrix.from_dense(F)
        super().__init__(F.n)
        self.F = F.with_blocks(None)
        self.g = _vec(g, F.m)
        self.tol = float(tol)
        self._stack_t = None
        self._stack = None
        self._warm = None
        self.last_iterations = 0

    def _stacked(self, t):
        if self._stack_t != t:
            n, m = self.size, self.F.m
            idx = np.arange(n)
            rows = np.concatenate([self.F.rows, m + idx])
            cols = np.concatenate([self.F.cols, idx])
            vals = np.concatenate([self.F.vals, np.full(n, 1.0 / np.sqrt(2.0 * t))])
            self._stack = SparseMatrix((m + n, n), rows, cols, vals)
            self._stack_t = t
        return self._stack

    def _evaluate(self, v, t):
        stack = self._stacked(t)
        rhs = np.concatenate([self.g, v / np.sqrt(2.0 * t)])
        res = lsqr_solve(stack, rhs, warm_start=self._warm, tol=self.tol)
        self.last_iterations = res.iterations
        self._warm = res.x
        return res.x.copy()

    def value(self, x):
        r = self.F.matvec(_vec(x, self.size)) - self.g
        return float(r @ r)

    def params(self):
        return {"F": self.F, "g": self.g}

    def reset(self):
        self._warm = None


class NegLogDetTrace(ProxOperator):
    """``f(S) = -log det S + tr(S Q)`` over symmetric ``S``, vectorized column-major.

    The input is symmetrized before the eigen-decomposition; this is the prox
    of ``f`` plus the indicator of symmetric matrices.
    """

    kind = "neg_log_det_trace"

    def __init__(self, Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if not np.allclose(Q, Q.T, rtol=1e-12, atol=1e-12):
            raise ValueError("Q must be symmetric")
        self.side = Q.shape[0]
        super().__init__(self.side**2)
        self.Q = 0.5 * (Q + Q.T)
        self.last_asymmetry = 0.0

    def _evaluate(self, v, t):
        q = self.side
        V = v.reshape(q, q, order="F")
        self.last_asymmetry = float(np.abs(V - V.T).max(initial=0.0))
        W = 0.5 * (V + V.T) - t * self.Q
        lam, U = kernels.jacobi_eigh(W)
        # (l + sqrt(l^2 + 4t)) / 2, rewritten to avoid cancellation for l << 0.
        mapped = np.where(
            lam >= 0,
            0.5 * (lam + np.sqrt(lam * lam + 4.0 * t)),
            2.0 * t / (np.sqrt(lam * lam + 4.0 * t) - lam),
        )
        S = (U * mapped) @ U.T
        S = 0.5 * (S + S.T)
        return S.ravel(order="F")

    def value(self, x):
        q = self.side
        S = _vec(x, self.size).reshape(q, q, order="F")
        if not np.allclose(S, S.T, rtol=1e-9, atol=1e-12):
            return np.inf
        # A positive determinant alone does not imply definiteness.
        lam = np.linalg.eigvalsh(0.5 * (S + S.T))
        if lam[0] <= 0:
            return np.inf
        return float(-np.log(lam).sum() + np.sum(S * self.Q))

    def params(self):
        return {"Q": self.Q}


class GroupLasso(ProxOperator):
    """``f(x) = alpha * sum_l ||x_l||_2`` over consecutive groups."""

    kind = "group_lasso"

    def __init__(self, block_widths, alpha: float = 1.0):
        widths = [int(w) for w in np.atleast_1d(block_widths)]
        if any(w <= 0 for w in widths):
            raise ValueError("group widths must be positive")
        super().__init__(sum(widths))
        self.block_widths = widths
        self.alpha = float(alpha)
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        self._starts = np.concatenate([[0], np.cumsum(widths)[:-1]]).astype(np.int64)

    def _norms(self, x):
        return np.sqrt(np.add.reduceat(x * x, self._starts)) if self.size else np.zeros(0)

    def _evaluate(self, v, t):
        norms = self._norms(v)
        thresh = t * self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norms > thresh, 1.0 - thresh / norms, 0.0)
        return v * np.repeat(scale, self.block_widths)

    def value(self, x):
        return self.alpha * float(self._norms(_vec(x, self.size)).sum())

    def params(self):
        return {"alpha": self.alpha, "block_widths": np.array(self.block_widths)}


class NuclearNorm(ProxOperator):
    """``f(X) = beta * ||X||_*`` for a ``rows x cols`` matrix, column-major."""

    kind = "nuclear_norm"

    def __init__(self, rows: int, cols: int, beta: float = 1.0):
        self.shape = (int(rows), int(cols))
        if min(self.shape) <= 0:
            raise ValueError("matrix shape must be positive")
        super().__init__(self.shape[0] * self.shape[1])
        self.beta = float(beta)
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    def _evaluate(self, v, t):
        if self.beta == 0:
            return v.copy()
        X = v.reshape(self.shape, order="F")
        u, s, vt = kernels.jacobi_svd(X)
        s = np.maximum(s - t * self.beta, 0.0)
        return ((u * s) @ vt).ravel(order="F")

    def value(self, x):
        X = _vec(x, self.size).reshape(self.shape, order="F")
        return self.beta * float(np.linalg.svd(X, compute_uv=False).sum())

    def params(self):
        return {"rows": self.shape[0], "cols": self.shape[1], "beta": self.beta}


class Logistic(ProxOperator):
    """``f(x) = sum_i log(1 + exp(-y_i x_i))`` with labels ``y_i`` in {-1, +1}."""

    kind = "logistic"

    def __init__(self, labels):
        labels = np.asarray(labels, dtype=float).ravel()
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        super().__init__(labels.size)
        self.labels = labels

    def _evaluate(self, v, t):
        return kernels.logistic_prox(v, t, self.labels)

    def value(self, x):
        return float(np.logaddexp(0.0, -self.labels * _vec(x, self.size)).sum())

    def params(self):
        return {"labels": self.labels}


class QuadFormPolyhedron(ProxOperator):
    """``f(x) = x^T Q x + c^T x`` restricted to ``F x <= d``.

    The prox is a strongly convex QP. With no inequality rows it reduces to
    the linear system ``(2tQ + I) x = v - t c``. Otherwise the dual, a
    nonnegative QP in the multipliers, is solved by accelerated projected
    gradient with adaptive restart, warm-started from the previous call.
    Every few iterations the support of the multipliers is used to attempt
    an exact equality-constrained solve, which is kept when it passes the
    KKT test.
    """

    kind = "quad_form_polyhedron"
    max_iter = 2000
    kkt_tol = 1e-8
    polish_every = 20

    def __init__(self, Q, c=None, F=None, d=None):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        n = Q.shape[0]
        if Q.shape != (n, n) or not np.allclose(Q, Q.T, rtol=1e-10, atol=1e-12):
            raise ValueError("Q must be square and symmetric")
        super().__init__(n)
        self.Q = 0.5 * (Q + Q.T)
        self.c = np.zeros(n) if c is None else _vec(c, n)
        if F is None:
            F = np.zeros((0, n))
        F = np.asarray(F.to_dense() if isinstance(F, SparseMatrix) else F, dtype=float)
        F = F.reshape(-1, n)
        self.F = F
        self.d = np.zeros(0) if d is None else _vec(d, F.shape[0])
        if self.d.size != F.shape[0]:
            raise ValueError("d must have one entry per row of F")
        if F.shape[0] and not self._polyhedron_feasible():
            raise InfeasiblePolyhedronError("the polyhedron {x : F x <= d} is empty")
        self._cache_t = None
        self._warm_mu = None
        self.last_iterations = 0
        self.last_kkt = 0.0

    def _polyhedron_feasible(self) -> bool:
        res = linprog(np.zeros(self.size), A_ub=self.F, b_ub=self.d,
                      bounds=[(None, None)] * self.size, method="highs")
        return res.status != 2

    def _factor(self, t):
        if self._cache_t != t:
            P = 2.0 * self.Q + np.eye(self.size) / t
            chol = sla.cho_factor(P)
            G = self.F @ sla.cho_solve(chol, self.F.T) if self.F.shape[0] else np.zeros((0, 0))
            G = 0.5 * (G + G.T)
            lmax = float(np.linalg.eigvalsh(G)[-1]) if G.size else 0.0
            self._cache = (chol, G, lmax)
            self._cache_t = t
        return self._cache

    def _kkt(self, mu, Fx):
        # Projected-gradient residual of the dual: covers primal feasibility
        # and complementary slackness, stationarity holds by construction.
        slack = self.d - Fx
        pg = mu - np.maximum(mu - slack, 0.0)
        return float(np.abs(pg).max(initial=0.0))

    def _evaluate(self, v, t):
        chol, G, lmax = self._factor(t)
        r = v / t - self.c
        x0 = sla.cho_solve(chol, r)
        p = self.F.shape[0]
        if p == 0:
            self.last_iterations = 0
            self.last_kkt = 0.0
            return x0
        # Dual: minimize 0.5 mu'G mu - mu'h over mu >= 0, with x = x0 - P^{-1}F'mu.
        h = self.F @ x0 - self.d
        scale = 1.0 + float(np.abs(self.d).max(initial=0.0)) + float(np.abs(h).max(initial=0.0))
        tol = self.kkt_tol * scale
        mu = np.zeros(p) if self._warm_mu is None else self._warm_mu.copy()

        def primal(m):
            return x0 - sla.cho_solve(chol, self.F.T @ m)

        def kkt_of(m):
            return self._kkt(m, h + self.d - G @ m)

        best_mu, best_kkt = mu, kkt_of(mu)
        it = 0
        if best_kkt > tol and lmax > 0:
            step = 1.0 / lmax
            y = mu.copy()
            theta = 1.0
            obj_prev = np.inf
            while it < self.max_iter:
                it += 1
                mu_new = np.maximum(y - step * (G @ y - h), 0.0)
                obj = 0.5 * mu_new @ (G @ mu_new) - h @ mu_new
                if obj > obj_prev:
                    # Adaptive restart: drop momentum when the objective rises.
                    theta = 1.0
                    y = mu.copy()
                    obj_prev = np.inf
                    continue
                theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
                y = mu_new + ((theta - 1.0) / theta_new) * (mu_new - mu)
                mu, theta, obj_prev = mu_new, theta_new, obj
                if it % self.polish_every == 0 or it == 1:
                    cand = self._polish(G, h, mu)
                    if cand is not None:
                        k = kkt_of(cand)
                        if k < best_kkt:
                            best_mu, best_kkt = cand, k
                k = kkt_of(mu)
                if k < best_kkt:
                    best_mu, best_kkt = mu, k
                if best_kkt <= tol:
                    break
        self.last_iterations = it
        self.last_kkt = best_kkt / scale
        self._warm_mu = best_mu
        return primal(best_mu)

    @staticmethod
    def _polish(G, h, mu):
        active = mu > 0
        if not active.any():
            return np.zeros_like(mu)
        Gaa = G[np.ix_(active, active)]
        try:
            sol = np.linalg.solve(Gaa, h[active])
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(Gaa, h[active], rcond=None)[0]
        if np.any(sol < 0):
            return None
        out = np.zeros_like(mu)
        out[active] = sol
        return out

    def value(self, x):
        x = _vec(x, self.size)
        if self.F.shape[0]:
            viol = self.F @ x - self.d
            if np.any(viol > 1e-7 * (1.0 + np.abs(self.d))):
                return np.inf
        return float(x @ self.Q @ x + self.c @ x)

    def params(self):
        return {"Q": self.Q, "c": self.c, "F": self.F, "d": self.d}

    def reset(self):
        self._warm_mu = None


class ScaledProx(ProxOperator):
    """Prox of ``x_hat -> f(e * x_hat)``: ``(1/e) prox_{e^2 t f}(e v_hat)``."""

    def __init__(self, base: ProxOperator, scale: float):
        scale = float(scale)
        if not (scale > 0 and np.isfinite(scale)):
            raise ValueError("scale must be positive and finite")
        super().__init__(base.size)
        self.base = base
        self.scale = scale
        self.has_value = base.has_value

    @property
    def kind(self):
        return self.base.kind

    def evaluate(self, v, t):
        if self.scale == 1.0:
            return self.base.evaluate(v, t)
        v = _vec(v, self.size)
        t = _check_t(t)
        e = self.scale
        return self.base.evaluate(e * v, e * e * t) / e

    __call__ = evaluate

    def value(self, x):
        return self.base.value(self.scale * _vec(x, self.size))

    def params(self):
        return self.base.params()

    def reset(self):
        self.base.reset()

    def __repr__(self):
        return f"ScaledProx({self.base!r}, scale={self.scale:g})"


def wrap_scaled(p: ProxOperator, scale: float) -> ProxOperator:
    """Return the operator of ``x_hat -> f(scale * x_hat)``."""
    return ScaledProx(p, scale)


class CustomProx(ProxOperator):
    """Wrap a user function ``fn(v, t) -> x``.

    ``value_fn`` is optional; without it ``value`` raises and value-based
    diagnostics are skipped. Custom operators cannot be written to a
    problem file.
    """

    kind = "custom"

    def __init__(self, size: int, fn: Callable, value_fn: Callable | None = None):
        super().__init__(size)
        self.fn = fn
        self.value_fn = value_fn
        self.has_value = value_fn is not None

    def _evaluate(self, v, t):
        x = np.asarray(self.fn(v, t), dtype=float).ravel()
        if x.size != self.size:
            raise ValueError("custom prox returned a vector of the wrong length")
        return x

    def value(self, x):
        if self.value_fn is None:
            raise NotImplementedError("no value function supplied")
        return float(self.value_fn(_vec(x, self.size)))


KINDS = {
    cls.kind: cls
    for cls in (Zero, AffineIndicator, Nonneg, Box, SoftThreshold, QuadBox,
                SumSquaresAffine, NegLogDetTrace, GroupLasso, NuclearNorm,
                Logistic, QuadFormPolyhedron)
}

# Kinds whose constructor takes the dimension as its first argument.
_SIZED = {"zero", "affine_indicator", "nonneg", "box", "soft_threshold", "quad_box"}


def make_prox(kind: str, size: int | None = None, **params) -> ProxOperator:
    """Build an operator from its kind name and parameters."""
    try:
        cls = KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown prox kind {kind!r}") from None
    if kind in _SIZED:
        if size is None:
            raise ValueError(f"kind {kind!r} needs a size")
        return cls(size, **params)
    op = cls(**params)
    if size is not None and op.size != size:
        raise ValueError(f"{kind}: parameters imply size {op.size}, file says {size}")
    return op

