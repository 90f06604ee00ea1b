"""The Douglas-Rachford map for block-separable problems with a linear constraint.

For ``minimize sum_i f_i(x_i)  s.t.  A x = b`` one step from ``v`` is::

    x_half = prox_{t f}(v)                (blockwise)
    v_half = 2 x_half - v
    x_next = projection of v_half onto {x : A x = b}
    v_next = v + x_next - x_half

and ``g = v - v_next`` is the fixed-point residual.
"""
from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .prox import ProxOperator
from .sparsela import SparseMatrix, lsqr_solve, matvec, rmatvec

__all__ = [
    "BlockProblem",
    "DrsStep",
    "Residuals",
    "WarmState",
    "ProxError",
    "eval_prox",
    "project_affine",
    "drs_step",
    "residuals",
    "check_stop",
]


class ProxError(RuntimeError):
    """A proximal operator failed; ``block`` is the offending block index."""

    def __init__(self, block: int, cause: BaseException):
        super().__init__(f"prox evaluation failed on block {block}: {cause}")
        self.block = block
        self.cause = cause


class BlockProblem:
    """``minimize sum_i f_i(x_i)  subject to  sum_i A_i x_i = b``.

    Parameters
    ----------
    prox_ops : sequence of ProxOperator
        One operator per block; their sizes define the column partition.
    A : SparseMatrix, scipy sparse matrix or array, optional
        Constraint matrix with ``sum(n_i)`` columns. Omitting ``A`` and ``b``
        gives the unconstrained problem (``m = 0``).
    b : array_like, optional
        Right-hand side, zero when omitted.
    """

    def __init__(self, prox_ops: Sequence[ProxOperator], A=None, b=None):
        prox_ops = list(prox_ops)
        if not prox_ops:
            raise ValueError("need at least one block")
        sizes = [p.size for p in prox_ops]
        if any(s <= 0 for s in sizes):
            raise ValueError("every block needs a positive size")
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        n = int(offsets[-1])
        if A is None:
            if b is not None and np.size(b) != 0:
                raise ValueError("b given without A")
            A = SparseMatrix.zeros(0, n)
        elif not isinstance(A, SparseMatrix):
            A = SparseMatrix.from_scipy(A) if hasattr(A, "tocoo") else SparseMatrix.from_dense(A)
        if A.n != n:
            raise ValueError(f"A has {A.n} columns but blocks total {n}")
        self.A = A.with_blocks(offsets)
        self.b = np.zeros(A.m) if b is None else np.asarray(b, dtype=float).ravel()
        if self.b.size != A.m:
            raise ValueError(f"b has length {self.b.size}, expected {A.m}")
        if not np.all(np.isfinite(self.b)):
            raise ValueError("b must be finite")
        self.prox_ops = prox_ops
        self.offsets = tuple(int(o) for o in offsets)
        self._AT = None

    @property
    def N(self) -> int:
        return len(self.prox_ops)

    @property
    def n(self) -> int:
        return self.offsets[-1]

    @property
    def m(self) -> int:
        return self.A.m

    @property
    def sizes(self) -> list[int]:
        return [p.size for p in self.prox_ops]

    @property
    def AT(self) -> SparseMatrix:
        if self._AT is None:
            self._AT = self.A.T
        return self._AT

    def slices(self):
        o = self.offsets
        return [slice(o[i], o[i + 1]) for i in range(self.N)]

    def split(self, x) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        return [x[s].copy() for s in self.slices()]

    def objective(self, x) -> float:
        """``sum_i f_i(x_i)`` for a stacked vector or a list of blocks."""
        blocks = x if isinstance(x, (list, tuple)) else self.split(x)
        return float(sum(p.value(xi) for p, xi in zip(self.prox_ops, blocks)))

    def reset(self) -> None:
        for p in self.prox_ops:
            p.reset()

    def __repr__(self) -> str:
        return f"BlockProblem(N={self.N}, n={self.n}, m={self.m})"


@dataclass
class DrsStep:
    x_half: np.ndarray
    v_half: np.ndarray
    x_next: np.ndarray
    v_next: np.ndarray
    g: np.ndarray


@dataclass
class Residuals:
    r_prim: np.ndarray
    r_dual: np.ndarray
    lam: np.ndarray
    norm: float

    @property
    def prim_norm(self) -> float:
        return float(np.linalg.norm(self.r_prim))

    @property
    def dual_norm(self) -> float:
        return float(np.linalg.norm(self.r_dual))


@dataclass
class WarmState:
    """Warm starts for the two least-squares solves, plus an optional pool."""

    projection: np.ndarray | None = None
    dual: np.ndarray | None = None
    executor: Executor | None = None
    lsqr_tol: float = 1e-10
    lsqr_iters: list = field(default_factory=lambda: [0, 0])


def _one_prox(i, op, v, t):
    try:
        x = op.evaluate(v, t)
    except ProxError:
        raise
    except Exception as exc:  # surface which block failed
        raise ProxError(i, exc) from exc
    if not np.all(np.isfinite(x)):
        raise ProxError(i, FloatingPointError("non-finite prox output"))
    return x


def eval_prox(v, problem: BlockProblem, t: float, executor: Executor | None = None) -> np.ndarray:
    """Blockwise prox of the stacked vector ``v``."""
    v = np.asarray(v, dtype=float)
    parts = problem.slices()
    if executor is None or problem.N == 1:
        outs = [_one_prox(i, op, v[s], t) for i, (op, s) in enumerate(zip(problem.prox_ops, parts))]
    else:
        futs = [executor.submit(_one_prox, i, op, v[s], t)
                for i, (op, s) in enumerate(zip(problem.prox_ops, parts))]
        outs = [f.result() for f in futs]
    return np.concatenate(outs)


def _projection(v, problem, warm, tol):
    A = problem.A
    if A.m == 0:
        return v.copy(), None
    res = lsqr_solve(A, matvec(A, v) - problem.b, warm_start=warm, tol=tol)
    return v - res.x, res


def project_affine(v, problem: BlockProblem, warm=None, tol: float = 1e-10) -> np.ndarray:
    """Project ``v`` onto ``{x : A x = b}`` as ``v - d`` with ``d`` from LSQR.

    ``d`` approximately minimizes ``||A d - (A v - b)||``; ``warm`` is an
    initial guess for ``d``.
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size != problem.n:
        raise ValueError(f"v has length {v.size}, expected {problem.n}")
    return _projection(v, problem, warm, tol)[0]


def drs_step(v, problem: BlockProblem, t: float, state: WarmState | None = None) -> DrsStep:
    """Apply the Douglas-Rachford map once."""
    if not t > 0:
        raise ValueError("t must be positive")
    v = np.asarray(v, dtype=float).ravel()
    if v.size != problem.n:
        raise ValueError(f"v has length {v.size}, expected {problem.n}")
    state = state if state is not None else WarmState()
    x_half = eval_prox(v, problem, t, state.executor)
    v_half = 2.0 * x_half - v
    x_next, res = _projection(v_half, problem, state.projection, state.lsqr_tol)
    if res is not None:
        state.projection = res.x
        state.lsqr_iters[0] = res.iterations
    v_next = v + x_next - x_half
    return DrsStep(x_half, v_half, x_next, v_next, v - v_next)


def residuals(v, x_half, problem: BlockProblem, t: float,
              state: WarmState | None = None) -> Residuals:
    """Primal and dual residuals at ``x_half = prox_{t f}(v)``.

    The dual variable minimizes ``||A^T lam - (x_half - v)/t||``.
    """
    v = np.asarray(v, dtype=float)
    x_half = np.asarray(x_half, dtype=float)
    state = state if state is not None else WarmState()
    grad = (v - x_half) / t
    if problem.m == 0:
        r_prim = np.zeros(0)
        lam = np.zeros(0)
        r_dual = grad
    else:
        A = problem.A
        r_prim = matvec(A, x_half) - problem.b
        res = lsqr_solve(problem.AT, -grad, warm_start=state.dual, tol=state.lsqr_tol)
        lam = res.x
        state.dual = lam
        state.lsqr_iters[1] = res.iterations
        r_dual = grad + rmatvec(A, lam)
    norm = float(np.sqrt(r_prim @ r_prim + r_dual @ r_dual))
    return Residuals(r_prim, r_dual, lam, norm)


def check_stop(res: Residuals | float, r0_norm: float, eps_abs: float, eps_rel: float) -> bool:
    """``||r|| <= eps_abs + eps_rel * ||r0||``."""
    norm = res.norm if isinstance(res, Residuals) else float(res)
    return norm <= eps_abs + eps_rel * r0_norm
