"""Sparse coordinate matrices and the least-squares kernels used by the solver."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ._backend import kernels

__all__ = [
    "SparseMatrix",
    "LsqrResult",
    "matvec",
    "rmatvec",
    "lsqr_solve",
    "ridge_lstsq",
    "spectral_norm",
]


class SparseMatrix:
    """Coordinate-format matrix with a block partition of its columns.

    Entries are canonicalized at construction: sorted by (column, row) with
    duplicates summed, so every product accumulates in the same order.

    Parameters
    ----------
    shape : (int, int)
        Number of rows and columns.
    rows, cols, vals : array_like
        Coordinate triplets.
    col_offsets : sequence of int, optional
        Block boundaries ``[0, n_1, n_1 + n_2, ..., n]``. Defaults to a
        single block spanning all columns.
    """

    __slots__ = ("shape", "rows", "cols", "vals", "col_offsets")

    def __init__(self, shape, rows, cols, vals, col_offsets: Sequence[int] | None = None):
        m, n = (int(shape[0]), int(shape[1]))
        if m < 0 or n < 0:
            raise ValueError(f"invalid shape {shape}")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.size == cols.size == vals.size):
            raise ValueError("rows, cols and vals must have equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
                raise ValueError("entry index out of range")
            if not np.all(np.isfinite(vals)):
                raise ValueError("matrix entries must be finite")
            order = np.lexsort((rows, cols))
            rows, cols, vals = rows[order], cols[order], vals[order]
            key = cols * max(m, 1) + rows
            first = np.r_[True, key[1:] != key[:-1]]
            if not first.all():
                starts = np.flatnonzero(first)
                vals = np.add.reduceat(vals, starts)
                rows, cols = rows[starts], cols[starts]
        if col_offsets is None:
            col_offsets = [0, n]
        offs = np.asarray(col_offsets, dtype=np.int64)
        if offs.ndim != 1 or offs.size < 2 or offs[0] != 0 or offs[-1] != n:
            raise ValueError("column offsets must start at 0 and end at n")
        if n > 0 and np.any(np.diff(offs) <= 0):
            raise ValueError("column offsets must be strictly increasing")
        self.shape = (m, n)
        self.rows = np.ascontiguousarray(rows)
        self.cols = np.ascontiguousarray(cols)
        self.vals = np.ascontiguousarray(vals)
        self.col_offsets = tuple(int(o) for o in offs)

    # -- construction helpers -------------------------------------------
    @classmethod
    def from_scipy(cls, mat, col_offsets=None) -> "SparseMatrix":
        coo = sp.coo_matrix(mat)
        return cls(coo.shape, coo.row, coo.col, coo.data, col_offsets)

    @classmethod
    def from_dense(cls, arr, col_offsets=None) -> "SparseMatrix":
        arr = np.atleast_2d(np.asarray(arr, dtype=float))
        r, c = np.nonzero(arr)
        return cls(arr.shape, r, c, arr[r, c], col_offsets)

    @classmethod
    def identity(cls, n: int, scale: float = 1.0) -> "SparseMatrix":
        idx = np.arange(n)
        return cls((n, n), idx, idx, np.full(n, float(scale)))

    @classmethod
    def zeros(cls, m: int, n: int) -> "SparseMatrix":
        return cls((m, n), [], [], [])

    @classmethod
    def hstack(cls, blocks: Sequence) -> "SparseMatrix":
        """Concatenate blocks side by side; each becomes one column block."""
        blocks = [b if isinstance(b, SparseMatrix) else cls.from_scipy(b) for b in blocks]
        if not blocks:
            raise ValueError("need at least one block")
        m = blocks[0].shape[0]
        if any(b.shape[0] != m for b in blocks):
            raise ValueError("all blocks must have the same number of rows")
        widths = [b.shape[1] for b in blocks]
        offs = np.concatenate([[0], np.cumsum(widths)])
        rows = np.concatenate([b.rows for b in blocks])
        cols = np.concatenate([b.cols + o for b, o in zip(blocks, offs[:-1])])
        vals = np.concatenate([b.vals for b in blocks])
        return cls((m, int(offs[-1])), rows, cols, vals, offs)

    # -- properties -----------------------------------------------------
    @property
    def m(self) -> int:
        return self.shape[0]

    @property
    def n(self) -> int:
        return self.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    @property
    def num_blocks(self) -> int:
        return len(self.col_offsets) - 1

    @property
    def block_widths(self) -> list[int]:
        o = self.col_offsets
        return [o[i + 1] - o[i] for i in range(len(o) - 1)]

    @property
    def T(self) -> "SparseMatrix":
        return SparseMatrix((self.n, self.m), self.cols, self.rows, self.vals)

    def with_blocks(self, col_offsets) -> "SparseMatrix":
        return SparseMatrix(self.shape, self.rows, self.cols, self.vals, col_offsets)

    def block(self, i: int) -> "SparseMatrix":
        lo, hi = self.col_offsets[i], self.col_offsets[i + 1]
        keep = (self.cols >= lo) & (self.cols < hi)
        return SparseMatrix((self.m, hi - lo), self.rows[keep], self.cols[keep] - lo, self.vals[keep])

    def scaled(self, row_scale=None, col_scale=None) -> "SparseMatrix":
        """Return ``diag(row_scale) @ self @ diag(col_scale)``."""
        vals = self.vals
        if row_scale is not None:
            vals = np.asarray(row_scale, dtype=float)[self.rows] * vals
        if col_scale is not None:
            vals = vals * np.asarray(col_scale, dtype=float)[self.cols]
        return SparseMatrix(self.shape, self.rows, self.cols, vals, self.col_offsets)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.cols), self.vals)
        return out

    def to_scipy(self) -> sp.csc_matrix:
        return sp.csc_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    def frobenius_norm(self) -> float:
        return float(np.sqrt(self.vals @ self.vals))

    def matvec(self, x) -> np.ndarray:
        return matvec(self, x)

    def rmatvec(self, y) -> np.ndarray:
        return rmatvec(self, y)

    def __matmul__(self, x):
        return matvec(self, x)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.col_offsets == other.col_offsets
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz}, blocks={self.num_blocks})"


def _as_vector(x, length: int, name: str) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if x.size != length:
        raise ValueError(f"{name} has length {x.size}, expected {length}")
    return x


def matvec(A: SparseMatrix, x) -> np.ndarray:
    """Return ``A @ x``, accumulating entries in canonical order."""
    x = _as_vector(x, A.n, "x")
    return kernels.coo_matvec(A.rows, A.cols, A.vals, x, A.m)


def rmatvec(A: SparseMatrix, y) -> np.ndarray:
    """Return ``A.T @ y``."""
    y = _as_vector(y, A.m, "y")
    return kernels.coo_rmatvec(A.rows, A.cols, A.vals, y, A.n)


@dataclass
class LsqrResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def default_max_iter(A: SparseMatrix) -> int:
    return 2 * min(A.m, A.n) + 50


def lsqr_solve(A: SparseMatrix, rhs, warm_start=None, tol: float = 1e-10,
               max_iter: int | None = None) -> LsqrResult:
    """Approximately minimize ``||A d - rhs||_2`` with LSQR.

    With ``warm_start`` the correction ``d'`` minimizing
    ``||A d' - (rhs - A warm_start)||`` is computed and ``warm_start + d'``
    returned. Non-convergence is not an error; check ``iterations`` against
    ``max_iter`` if it matters.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rhs = _as_vector(rhs, A.m, "rhs")
    if max_iter is None:
        max_iter = default_max_iter(A)
    if warm_start is not None:
        warm = _as_vector(warm_start, A.n, "warm_start")
        shifted = rhs - matvec(A, warm)
        d, itn, rnorm = kernels.lsqr(A.rows, A.cols, A.vals, A.m, A.n, shifted, tol, max_iter)
        return LsqrResult(warm + d, int(itn), float(rnorm))
    d, itn, rnorm = kernels.lsqr(A.rows, A.cols, A.vals, A.m, A.n, rhs, tol, max_iter)
    return LsqrResult(d, int(itn), float(rnorm))


def ridge_lstsq(Y, g, mu: float) -> np.ndarray:
    """Solve ``min ||g - Y gamma||^2 + mu ||gamma||^2`` for a tall, thin ``Y``.

    For ``mu > 0`` the stacked system ``[Y; sqrt(mu) I]`` is solved through a
    QR factorization. ``mu == 0`` falls back to the SVD-based minimum-norm
    least-squares solution, which is also defined when ``Y`` is rank deficient.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    g = np.asarray(g, dtype=float).ravel()
    if Y.shape[0] != g.size:
        raise ValueError("Y and g have incompatible shapes")
    k = Y.shape[1]
    if k == 0:
        return np.zeros(0)
    if mu == 0:
        return np.linalg.lstsq(Y, g, rcond=None)[0]
    stacked = np.vstack([Y, np.sqrt(mu) * np.eye(k)])
    q, r = np.linalg.qr(stacked)
    return np.linalg.solve(r, q[: Y.shape[0]].T @ g)


def spectral_norm(A: SparseMatrix, iters: int = 50, seed: int = 0) -> float:
    """Estimate ``||A||_2`` by power iteration on ``A^T A``."""
    if A.nnz == 0:
        return 0.0
    x = np.random.default_rng(seed).standard_normal(A.n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = rmatvec(A, matvec(A, x))
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        est = np.sqrt(ny)
        x = y / ny
    return float(est)
