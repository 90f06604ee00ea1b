"""Type-II Anderson acceleration with adaptive regularization.

The memory keeps the last ``M`` differences ``s = v^{j+1} - v^j`` and
``y = g^{j+1} - g^j`` together with the last ``M + 1`` plain DRS outputs.
Given the current residual ``g`` the extrapolation weights come from::

    gamma = argmin ||g - Y gamma||^2 + eta (||S||_F^2 + ||Y||_F^2) ||gamma||^2
    alpha = (gamma_0, gamma_1 - gamma_0, ..., 1 - gamma_{M-1})

and the candidate is ``sum_j alpha_j F(v^{k-M+j})``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .sparsela import ridge_lstsq

__all__ = [
    "AaMemory",
    "AaCandidate",
    "candidate",
    "alpha_from_gamma",
    "hk_matrix",
    "hk_norm",
    "hk_norm_bound_check",
]


class AaMemory:
    """Difference columns and DRS outputs for one Anderson run.

    Parameters
    ----------
    max_mem : int
        Maximum number of difference columns ``M_max``.
    refresh_every : int
        The Frobenius-norm caches are updated incrementally and recomputed
        from scratch after this many pushes.
    """

    def __init__(self, max_mem: int = 10, refresh_every: int = 1000):
        if max_mem < 0:
            raise ValueError("max_mem must be nonnegative")
        self.max_mem = int(max_mem)
        self.refresh_every = int(refresh_every)
        self._s: deque = deque()
        self._y: deque = deque()
        self.drs_history: deque = deque(maxlen=self.max_mem + 1)
        self.s_sq = 0.0
        self.y_sq = 0.0
        self.pushes = 0
        self._dim = None

    @property
    def width(self) -> int:
        return len(self._y)

    @property
    def S(self) -> np.ndarray:
        return self._stack(self._s)

    @property
    def Y(self) -> np.ndarray:
        return self._stack(self._y)

    def _stack(self, cols) -> np.ndarray:
        if not cols:
            return np.zeros((self._dim or 0, 0))
        return np.column_stack(cols)

    def push(self, s, y) -> None:
        """Append one ``(s, y)`` pair, evicting the oldest beyond ``max_mem``."""
        s = np.array(s, dtype=float).ravel()
        y = np.array(y, dtype=float).ravel()
        if s.size != y.size or (self._dim is not None and s.size != self._dim):
            raise ValueError("s and y must match the memory dimension")
        self._dim = s.size
        if self.max_mem == 0:
            return
        self._s.append(s)
        self._y.append(y)
        self.s_sq += float(s @ s)
        self.y_sq += float(y @ y)
        if len(self._y) > self.max_mem:
            old_s = self._s.popleft()
            old_y = self._y.popleft()
            self.s_sq -= float(old_s @ old_s)
            self.y_sq -= float(old_y @ old_y)
        self.pushes += 1
        if self.pushes % self.refresh_every == 0:
            self.refresh()
        # Incremental subtraction can leave tiny negative values.
        self.s_sq = max(self.s_sq, 0.0)
        self.y_sq = max(self.y_sq, 0.0)

    def push_drs(self, v_drs) -> None:
        """Record a plain DRS output ``F(v^j)``."""
        self.drs_history.append(np.array(v_drs, dtype=float).ravel())

    def refresh(self) -> None:
        self.s_sq = float(sum(c @ c for c in self._s))
        self.y_sq = float(sum(c @ c for c in self._y))

    def clear(self) -> None:
        self._s.clear()
        self._y.clear()
        self.drs_history.clear()
        self.s_sq = self.y_sq = 0.0


@dataclass
class AaCandidate:
    v_aa: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    mu: float


def alpha_from_gamma(gamma) -> np.ndarray:
    """Affine weights summing to one from the unconstrained coefficients."""
    gamma = np.asarray(gamma, dtype=float)
    m = gamma.size
    alpha = np.empty(m + 1)
    if m == 0:
        alpha[0] = 1.0
        return alpha
    alpha[0] = gamma[0]
    alpha[1:m] = gamma[1:] - gamma[:-1]
    alpha[m] = 1.0 - gamma[-1]
    return alpha


def candidate(mem: AaMemory, g, eta: float, drs_history=None,
              regularization: str = "adaptive") -> AaCandidate:
    """Anderson extrapolation of the stored DRS outputs.

    Parameters
    ----------
    mem : AaMemory
        Memory of width ``M >= 1``.
    g : array_like
        Current fixed-point residual ``g^k``.
    eta : float
        Regularization coefficient.
    drs_history : sequence of arrays, optional
        The last ``M + 1`` DRS outputs, oldest first. Defaults to the
        ones stored in ``mem``.
    regularization : {"adaptive", "constant", "none"}
        ``adaptive`` uses ``mu = eta (||S||_F^2 + ||Y||_F^2)``, ``constant``
        uses ``mu = eta`` and ``none`` solves the unregularized problem
        (minimum-norm solution).
    """
    M = mem.width
    if M == 0:
        raise ValueError("Anderson step needs at least one stored difference")
    hist = list(mem.drs_history if drs_history is None else drs_history)[-(M + 1):]
    if len(hist) != M + 1:
        raise ValueError(f"need {M + 1} DRS outputs, have {len(hist)}")
    if regularization == "adaptive":
        if not eta > 0:
            raise ValueError("eta must be positive")
        mu = eta * (mem.s_sq + mem.y_sq)
    elif regularization == "constant":
        mu = float(eta)
    elif regularization == "none":
        mu = 0.0
    else:
        raise ValueError(f"unknown regularization {regularization!r}")
    gamma = ridge_lstsq(mem.Y, g, mu)
    alpha = alpha_from_gamma(gamma)
    v_aa = np.zeros_like(hist[-1])
    for a, h in zip(alpha, hist):
        v_aa += a * h
    return AaCandidate(v_aa, gamma, alpha, mu)


def _mu(mem: AaMemory, eta: float) -> float:
    return eta * (mem.s_sq + mem.y_sq)


def hk_matrix(mem: AaMemory, eta: float) -> np.ndarray:
    """Dense ``H = I + (S - Y)(Y^T Y + mu I)^{-1} Y^T`` (for small tests)."""
    S, Y = mem.S, mem.Y
    n, M = Y.shape
    mu = _mu(mem, eta)
    W = np.linalg.solve(Y.T @ Y + mu * np.eye(M), Y.T)
    return np.eye(n) + (S - Y) @ W


def hk_norm(mem: AaMemory, eta: float) -> float:
    """``||H||_2`` computed exactly through its low-rank structure.

    ``H - I = U W^T`` with ``U = S - Y`` and ``W = Y (Y^T Y + mu I)^{-1}``.
    On an orthonormal basis ``Q`` of ``[U, W]`` the operator acts as
    ``I + (Q^T U)(W^T Q)`` and it is the identity on the complement.
    """
    S, Y = mem.S, mem.Y
    n, M = Y.shape
    if M == 0:
        return 1.0
    mu = _mu(mem, eta)
    U = S - Y
    W = np.linalg.solve(Y.T @ Y + mu * np.eye(M), Y.T).T
    Q, R = np.linalg.qr(np.hstack([U, W]))
    # Drop directions that are numerically absent.
    keep = np.abs(np.diag(R)) > 1e-14 * max(1.0, np.abs(R).max(initial=0.0))
    Q = Q[:, keep]
    r = Q.shape[1]
    small = np.eye(r) + (Q.T @ U) @ (W.T @ Q)
    norm = float(np.linalg.norm(small, 2)) if r else 1.0
    return max(norm, 1.0) if r < n else norm


def hk_norm_bound_check(mem: AaMemory, eta: float) -> float:
    """Return ``||H||_2`` and verify it against ``1 + 2/eta``."""
    norm = hk_norm(mem, eta)
    bound = 1.0 + 2.0 / eta + 1e-6
    if not norm <= bound:
        raise AssertionError(f"||H||_2 = {norm:.6g} exceeds 1 + 2/eta = {bound:.6g}")
    return norm
