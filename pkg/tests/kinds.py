"""Random instances of every prox kind, shared by several test modules."""
import numpy as np

from a2dr.drs import BlockProblem
from a2dr.prox import (AffineIndicator, Box, GroupLasso, Logistic, NegLogDetTrace, Nonneg,
                       NuclearNorm, QuadBox, QuadFormPolyhedron, SoftThreshold,
                       SumSquaresAffine, Zero)


def random_operator(kind, rng):
    n = 6
    if kind == "zero":
        return Zero(n)
    if kind == "affine_indicator":
        return AffineIndicator(n, rng.standard_normal(n))
    if kind == "nonneg":
        return Nonneg(n)
    if kind == "box":
        lo = -rng.random(n)
        return Box(n, lo, lo + rng.random(n))
    if kind == "soft_threshold":
        return SoftThreshold(n, rng.random() + 0.1)
    if kind == "quad_box":
        return QuadBox(n, rng.random(n), -1.0 - rng.random(n), 1.0 + rng.random(n))
    if kind == "sum_squares_affine":
        return SumSquaresAffine(rng.standard_normal((4, n)), rng.standard_normal(4), tol=1e-13)
    if kind == "neg_log_det_trace":
        B = rng.standard_normal((3, 3))
        return NegLogDetTrace(B @ B.T / 3)
    if kind == "group_lasso":
        return GroupLasso([2, 3, 1], rng.random() + 0.1)
    if kind == "nuclear_norm":
        return NuclearNorm(3, 2, rng.random() + 0.1)
    if kind == "logistic":
        return Logistic(np.where(rng.random(n) < 0.5, -1.0, 1.0))
    if kind == "quad_form_polyhedron":
        H = rng.standard_normal((n, n))
        F = rng.standard_normal((4, n))
        return QuadFormPolyhedron(H.T @ H / n, rng.standard_normal(n), F,
                                  F @ rng.standard_normal(n) + 0.1)
    raise ValueError(kind)


ALL_KINDS = ["zero", "affine_indicator", "nonneg", "box", "soft_threshold", "quad_box",
             "sum_squares_affine", "neg_log_det_trace", "group_lasso", "nuclear_norm",
             "logistic", "quad_form_polyhedron"]


def random_input(op, rng, scale=3.0):
    v = scale * rng.standard_normal(op.size)
    if op.kind == "neg_log_det_trace":
        q = op.side
        V = v.reshape(q, q)
        v = (0.5 * (V + V.T)).ravel()
    return v


def random_problem(rng, kinds=None, m=None):
    kinds = kinds or list(rng.choice(ALL_KINDS, size=int(rng.integers(1, 4))))
    ops = [random_operator(k, rng) for k in kinds]
    n = sum(op.size for op in ops)
    m = int(rng.integers(1, n)) if m is None else m
    A = rng.standard_normal((m, n))
    x0 = np.concatenate([op(random_input(op, rng), 1.0) for op in ops])
    return BlockProblem(ops, A, A @ x0)
