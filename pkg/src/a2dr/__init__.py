"""Anderson-accelerated Douglas-Rachford splitting for block-separable problems.

Solves ``minimize sum_i f_i(x_i)  subject to  sum_i A_i x_i = b`` given only
the proximal operators of the ``f_i``.
"""
from ._backend import BACKEND
from .drs import BlockProblem, ProxError
from .prox import KINDS, make_prox, wrap_scaled
from .solver import Decision, SolverOptions, SolverResult, Status, solve
from .sparsela import SparseMatrix

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BlockProblem",
    "ProxError",
    "KINDS",
    "make_prox",
    "wrap_scaled",
    "Decision",
    "SolverOptions",
    "SolverResult",
    "Status",
    "solve",
    "SparseMatrix",
]
