"""Presolve, equilibration and step-size selection.

The constraint matrix is scaled to ``A_hat = D A E`` with ``D`` diagonal over
rows and ``E`` constant within each column block. The scalings come from a
regularized Sinkhorn-Knopp iteration: with ``u = 2 log d``, ``v = 2 log e``
and ``B_ij`` the squared norm of row ``i`` restricted to block ``j``, it
minimizes::

    sum_ij B_ij exp(u_i + v_j) - N sum(u) - m sum(v)
        + gamma (N sum exp(u) + m sum exp(v))

by exact coordinate minimization over all of ``u``, then all of ``v``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .drs import BlockProblem
from .prox import wrap_scaled
from .sparsela import SparseMatrix, lsqr_solve, matvec

__all__ = [
    "PresolveResult",
    "Equilibration",
    "presolve_check",
    "block_square_norms",
    "equilibrate",
    "choose_t",
    "Unscaler",
    "rescale_problem",
]

MACHINE_EPS = 2.0**-52


@dataclass
class PresolveResult:
    feasible: bool
    residual: float
    x_ls: np.ndarray


def presolve_check(A: SparseMatrix, b, tol: float = 1e-8) -> PresolveResult:
    """Least-squares test of whether ``A x = b`` has a solution."""
    b = np.asarray(b, dtype=float).ravel()
    if A.m == 0:
        return PresolveResult(True, 0.0, np.zeros(A.n))
    x = lsqr_solve(A, b, tol=min(tol, 1e-10), max_iter=max(10 * min(A.m, A.n) + 100, 200)).x
    resid = float(np.linalg.norm(matvec(A, x) - b))
    return PresolveResult(resid <= tol * (1.0 + np.linalg.norm(b)), resid, x)


@dataclass
class Equilibration:
    d: np.ndarray
    e: np.ndarray
    t: float
    gamma: float
    sweeps: int = 0

    def column_scale(self, offsets) -> np.ndarray:
        """Expand the block scalings ``e`` to one entry per column."""
        return np.repeat(self.e, np.diff(np.asarray(offsets)))


def block_square_norms(A: SparseMatrix, offsets=None) -> sp.csr_matrix:
    """``B_ij``: sum of squares of row ``i`` over the columns of block ``j``."""
    offsets = np.asarray(A.col_offsets if offsets is None else offsets)
    block_of_col = np.searchsorted(offsets, A.cols, side="right") - 1
    N = offsets.size - 1
    return sp.csr_matrix((A.vals**2, (A.rows, block_of_col)), shape=(A.m, N))


def equilibrate(A: SparseMatrix, offsets=None, max_sweeps: int = 50,
                tol: float = 1e-8) -> Equilibration:
    """Regularized Sinkhorn-Knopp scaling of ``A`` over rows and column blocks.

    Rows or blocks without nonzeros keep scaling 1 and do not enter the
    objective. An all-zero ``A`` gives unit scalings.
    """
    offsets = np.asarray(A.col_offsets if offsets is None else offsets)
    m, N = A.m, offsets.size - 1
    d = np.ones(m)
    e = np.ones(N)
    B = block_square_norms(A, offsets)
    row_live = np.asarray(B.sum(axis=1)).ravel() > 0
    col_live = np.asarray(B.sum(axis=0)).ravel() > 0
    if m == 0 or not row_live.any():
        return Equilibration(d, e, choose_t(e), 0.0, 0)
    Bl = B[row_live][:, col_live]
    BlT = Bl.T.tocsr()
    ml, Nl = Bl.shape
    gamma = (ml + Nl) / (ml * Nl) * np.sqrt(MACHINE_EPS)
    u = np.zeros(ml)
    v = np.zeros(Nl)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        u_new = np.log(Nl) - np.log(Bl @ np.exp(v) + gamma * Nl)
        v_new = np.log(ml) - np.log(BlT @ np.exp(u_new) + gamma * ml)
        change = max(np.abs(u_new - u).max(), np.abs(v_new - v).max())
        u, v = u_new, v_new
        if change <= tol:
            break
    d_live = np.exp(u / 2.0)
    e_live = np.exp(v / 2.0)
    # Rescale: equal geometric means and ||D A E||_F = sqrt(min(m, N)).
    fro = np.sqrt(float(d_live**2 @ (Bl @ e_live**2)))
    c = np.sqrt(min(m, N)) / fro
    log_ratio = np.mean(np.log(e_live)) - np.mean(np.log(d_live))
    d_live = d_live * np.sqrt(c) * np.exp(0.5 * log_ratio)
    e_live = e_live * np.sqrt(c) * np.exp(-0.5 * log_ratio)
    d[row_live] = d_live
    e[col_live] = e_live
    return Equilibration(d, e, choose_t(e), float(gamma), sweeps)


def choose_t(e) -> float:
    """``t = 0.1 * (prod e_j)^(-2/N)``, evaluated through the mean log."""
    e = np.asarray(e, dtype=float).ravel()
    if e.size == 0 or np.any(e <= 0):
        raise ValueError("scalings must be positive")
    return float(0.1 * np.exp(-2.0 * np.mean(np.log(e))))


class Unscaler:
    """Map solutions of the scaled problem back to the original variables."""

    def __init__(self, eq: Equilibration, offsets):
        self.eq = eq
        self.offsets = tuple(offsets)
        self.col_scale = eq.column_scale(offsets)

    def __call__(self, x_hat) -> np.ndarray:
        return self.col_scale * np.asarray(x_hat, dtype=float)

    def dual(self, lam_hat) -> np.ndarray:
        return self.eq.d * np.asarray(lam_hat, dtype=float)

    def to_scaled(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) / self.col_scale


def rescale_problem(problem: BlockProblem, eq: Equilibration):
    """Return the scaled problem ``(f_i(e_i x_i), D A E, D b)`` and its unscaler."""
    col_scale = eq.column_scale(problem.offsets)
    A_hat = problem.A.scaled(eq.d, col_scale)
    ops = [wrap_scaled(p, ei) for p, ei in zip(problem.prox_ops, eq.e)]
    scaled = BlockProblem(ops, A_hat, eq.d * problem.b)
    return scaled, Unscaler(eq, problem.offsets)
