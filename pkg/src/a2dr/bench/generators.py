"""Seeded instance generators for the seven benchmark families.

Every generator draws from ``numpy.random.default_rng`` streams spawned from
one ``SeedSequence(seed)``: each random matrix or vector gets its own child
stream, in a fixed order listed in the generator, so changing one size never
changes how an unrelated quantity is drawn.

Sizes come from named presets (``desk`` for quick runs, ``large`` for the
full-size instances) and may be overridden by keyword.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..drs import BlockProblem
from ..prox import (GroupLasso, Logistic, NegLogDetTrace, Nonneg, NuclearNorm,
                    QuadBox, QuadFormPolyhedron, SoftThreshold, SumSquaresAffine)
from ..sparsela import SparseMatrix

__all__ = ["Instance", "FAMILIES", "PRESETS", "generate"]


@dataclass
class Instance:
    """A generated problem plus what the reference oracles need."""

    family: str
    seed: int
    sizes: dict
    problem: BlockProblem
    data: dict = field(default_factory=dict, repr=False)
    params: dict = field(default_factory=dict)

    def objective(self, x_blocks) -> float:
        return self.problem.objective(x_blocks)


def _streams(seed: int, names):
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(c) for name, c in zip(names, children)}


def _sparse_gaussian(rng, rows, cols, density):
    """Matrix with ``round(density * rows * cols)`` N(0,1) entries at uniform positions."""
    nnz = int(round(density * rows * cols))
    pos = rng.choice(rows * cols, size=nnz, replace=False)
    vals = rng.standard_normal(nnz)
    return sp.csc_matrix((vals, (pos // cols, pos % cols)), shape=(rows, cols))


def _hstack(*blocks):
    return SparseMatrix.from_scipy(sp.hstack(blocks, format="coo"))


def nnls(seed=0, p=300, q=500, density=0.001):
    """``minimize ||F z - g||^2  s.t.  z >= 0`` as ``x_1 = x_2`` consensus."""
    r = _streams(seed, ["F", "g"])
    F = _sparse_gaussian(r["F"], p, q, density)
    g = r["g"].standard_normal(p)
    eye = sp.identity(q, format="csc")
    ops = [SumSquaresAffine(SparseMatrix.from_scipy(F), g), Nonneg(q)]
    prob = BlockProblem(ops, _hstack(eye, -eye), np.zeros(q))
    return prob, {"F": F, "g": g}, {}


def _sparse_spd(rng, q, fraction):
    off_pairs = q * (q - 1) // 2
    target_off = max(fraction * q * q - q, 0.0) / 2.0
    prob = min(target_off / off_pairs, 1.0) if off_pairs else 0.0
    iu, ju = np.triu_indices(q, 1)
    mask = rng.random(off_pairs) < prob
    vals = rng.standard_normal(int(mask.sum()))
    S = np.zeros((q, q))
    S[iu[mask], ju[mask]] = vals
    S = S + S.T
    shift = max(0.0, -np.linalg.eigvalsh(S)[0]) + 1.0
    return S + shift * np.eye(q)


def sparse_inv_cov(seed=0, q=30, samples=1000, fraction=0.1, alpha_ratio=0.001):
    """``minimize -log det S + tr(S Q) + alpha ||S||_1`` as ``S_1 = S_2`` consensus."""
    r = _streams(seed, ["S", "samples"])
    S_true = _sparse_spd(r["S"], q, fraction)
    chol = np.linalg.cholesky(S_true)
    w = r["samples"].standard_normal((q, samples))
    Z = np.linalg.solve(chol.T, w)  # columns ~ N(0, S_true^{-1})
    Q = Z @ Z.T / samples
    Q = 0.5 * (Q + Q.T)
    off = np.abs(Q - np.diag(np.diag(Q)))
    alpha_max = float(off.max()) if q > 1 else 0.0
    alpha = alpha_ratio * alpha_max
    n = q * q
    eye = sp.identity(n, format="csc")
    ops = [NegLogDetTrace(Q), SoftThreshold(n, alpha)]
    prob = BlockProblem(ops, _hstack(eye, -eye), np.zeros(n))
    return prob, {"Q": Q, "S_true": S_true}, {"alpha": alpha, "alpha_max": alpha_max}


def second_difference(q: int) -> sp.csc_matrix:
    """The ``(q-2) x q`` second-difference operator."""
    if q < 3:
        raise ValueError("trend filtering needs q >= 3")
    rows = np.repeat(np.arange(q - 2), 3)
    cols = (np.arange(q - 2)[:, None] + np.arange(3)[None, :]).ravel()
    vals = np.tile([1.0, -2.0, 1.0], q - 2)
    return sp.csc_matrix((vals, (rows, cols)), shape=(q - 2, q))


def l1_trend(seed=0, q=500, alpha_ratio=0.01, alpha=None):
    """``minimize 0.5 ||y - z||^2 + alpha ||D z||_1`` with ``D z = w``."""
    if q < 3:
        raise ValueError("trend filtering needs q >= 3")
    r = _streams(seed, ["y"])
    y = r["y"].standard_normal(q)
    alpha_max = float(np.abs(y).max())
    if alpha is None:
        alpha = alpha_ratio * alpha_max
    D = second_difference(q)
    half = np.sqrt(0.5)
    ops = [SumSquaresAffine(SparseMatrix.identity(q, half), half * y),
           SoftThreshold(q - 2, alpha)]
    prob = BlockProblem(ops, _hstack(D, -sp.identity(q - 2)), np.zeros(q - 2))
    return prob, {"y": y, "D": D}, {"alpha": float(alpha), "alpha_max": alpha_max}


def commodity_flow(seed=0, p=40, q=70):
    """Quadratic flow and source costs subject to ``B z + s = 0``.

    Nodes ``0 .. p//3 - 1`` are transfer nodes, the next block up to
    ``2p//3`` are sinks and the rest are sources. Source capacities use
    the tighter rule up to and including index ``5p//6`` (1-based).
    """
    if q < p:
        raise ValueError("need at least as many arcs as nodes")
    r = _streams(seed, ["arcs", "sources", "costs_c", "costs_d"])
    extra = q - p + 1
    heads = r["arcs"].integers(0, p, size=extra)
    tails = (heads + r["arcs"].integers(1, p, size=extra)) % p  # distinct node
    rows = np.concatenate([heads, tails, np.arange(p - 1), np.arange(1, p)])
    cols = np.concatenate([np.arange(extra), np.arange(extra),
                           extra + np.arange(p - 1), extra + np.arange(p - 1)])
    vals = np.concatenate([np.ones(extra), -np.ones(extra), np.ones(p - 1), -np.ones(p - 1)])
    B = sp.csc_matrix((vals, (rows, cols)), shape=(p, q))

    third, two_thirds, five_sixths = p // 3, (2 * p) // 3, (5 * p) // 6
    s_raw = r["sources"].standard_normal(p)
    s_tilde = np.zeros(p)
    s_tilde[third:two_thirds] = -np.abs(s_raw[third:two_thirds])
    total = np.abs(s_raw[third:two_thirds]).sum()
    s_tilde[two_thirds:] = total / (p - two_thirds)

    s_max = np.zeros(p)
    s_max[two_thirds:five_sixths] = s_tilde[two_thirds:five_sixths] + 0.001
    s_max[five_sixths:] = 2.0 * (s_tilde[five_sixths:] + 0.001)

    x_tilde = np.linalg.lstsq(B.toarray(), -s_tilde, rcond=None)[0]
    x_max = np.abs(x_tilde) + 0.001
    x_max[q // 2:] *= 2.0

    c = r["costs_c"].uniform(0.0, 1.0, q)
    d = r["costs_d"].uniform(0.0, 1.0, p)

    w = np.zeros(p)
    lo = np.zeros(p)
    hi = np.zeros(p)
    lo[third:two_thirds] = hi[third:two_thirds] = s_tilde[third:two_thirds]
    w[two_thirds:] = d[two_thirds:]
    hi[two_thirds:] = s_max[two_thirds:]
    ops = [QuadBox(q, c, -x_max, x_max), QuadBox(p, w, lo, hi)]
    prob = BlockProblem(ops, _hstack(B, sp.identity(p)), np.zeros(p))
    data = {"B": B, "c": c, "source_weights": w, "x_max": x_max, "s_lo": lo,
            "s_hi": hi, "s_tilde": s_tilde, "x_tilde": x_tilde}
    return prob, data, {}


def optimal_control(seed=0, p=8, q=15, L=6):
    """Linear dynamics over ``L`` stages with quadratic cost and ``|u|_inf <= 1``.

    The same drawn offset ``h`` enters the dynamics and the simulation that
    fixes the terminal state, so the simulated trajectory is feasible.
    """
    if L < 2:
        raise ValueError("need at least two stages")
    r = _streams(seed, ["F", "G", "h", "z_init", "u"])
    F = r["F"].standard_normal((q, q))
    F /= np.abs(np.linalg.eigvals(F)).max()
    G = r["G"].standard_normal((q, p))
    h = r["h"].standard_normal(q)
    z_init = r["z_init"].standard_normal(q)
    u_hat = r["u"].standard_normal((L, p))
    u_tilde = u_hat / np.abs(u_hat).max(axis=1, keepdims=True)
    z_tilde = np.zeros((L, q))
    z_tilde[0] = z_init
    for ell in range(L - 1):
        z_tilde[ell + 1] = F @ z_tilde[ell] + G @ u_tilde[ell] + h
    z_term = z_tilde[-1]

    Fbig = sp.lil_matrix(((L + 1) * q, L * q))
    Gbig = sp.lil_matrix(((L + 1) * q, L * p))
    Fbig[0:q, 0:q] = np.eye(q)
    for ell in range(L - 1):
        rs = slice((ell + 1) * q, (ell + 2) * q)
        Fbig[rs, ell * q:(ell + 1) * q] = -F
        Fbig[rs, (ell + 1) * q:(ell + 2) * q] = np.eye(q)
        Gbig[rs, ell * p:(ell + 1) * p] = -G
    Fbig[L * q:, (L - 1) * q:] = np.eye(q)
    h_tilde = np.concatenate([z_init] + [h] * (L - 1) + [z_term])
    ops = [QuadBox(L * q, 1.0), QuadBox(L * p, 1.0, -1.0, 1.0)]
    prob = BlockProblem(ops, _hstack(Fbig.tocsc(), Gbig.tocsc()), h_tilde)
    data = {"F_tilde": Fbig.tocsc(), "G_tilde": Gbig.tocsc(), "h_tilde": h_tilde,
            "z_tilde": z_tilde, "u_tilde": u_tilde}
    return prob, data, {}


def coupled_qp(seed=0, L=4, s=10, q_l=30, p_l=20):
    """Block QPs with local polyhedra coupled by ``sum_l G_l z_l = h``."""
    names = []
    for ell in range(L):
        names += [f"c{ell}", f"F{ell}", f"G{ell}", f"z{ell}", f"H{ell}"]
    r = _streams(seed, names)
    blocks, Gs = [], []
    data = {"Q": [], "c": [], "F": [], "d": [], "G": []}
    h = np.zeros(s)
    for ell in range(L):
        c = r[f"c{ell}"].standard_normal(q_l)
        F = r[f"F{ell}"].standard_normal((p_l, q_l))
        G = r[f"G{ell}"].standard_normal((s, q_l))
        z = r[f"z{ell}"].standard_normal(q_l)
        H = r[f"H{ell}"].standard_normal((q_l, q_l))
        d = F @ z + 0.1
        Q = H.T @ H
        h += G @ z
        blocks.append(QuadFormPolyhedron(Q, c, F, d))
        Gs.append(sp.csc_matrix(G))
        for key, val in zip(("Q", "c", "F", "d", "G"), (Q, c, F, d, G)):
            data[key].append(val)
    data["h"] = h
    prob = BlockProblem(blocks, _hstack(*Gs), h)
    return prob, data, {}


def multitask_logistic(seed=0, p=30, s=50, L=3, alpha=0.1, beta=0.1):
    """Logistic loss on ``W theta`` with group-lasso and nuclear-norm penalties.

    Variables are ``Z = W theta`` (p x L), ``theta`` and a copy
    ``theta_tilde`` (s x L), all vectorized column-major.
    """
    r = _streams(seed, ["W", "theta"])
    W = r["W"].standard_normal((p, s))
    theta_star = r["theta"].standard_normal((s, L))
    Y = np.where(W @ theta_star > 0, 1.0, -1.0)
    nz, nt = p * L, s * L
    Wbig = sp.kron(sp.identity(L), sp.csc_matrix(W), format="csc")
    top = sp.hstack([sp.identity(nz), -Wbig, sp.csc_matrix((nz, nt))])
    bottom = sp.hstack([sp.csc_matrix((nt, nz)), sp.identity(nt), -sp.identity(nt)])
    A = SparseMatrix.from_scipy(sp.vstack([top, bottom], format="coo"))
    ops = [Logistic(Y.ravel(order="F")), GroupLasso([s] * L, alpha), NuclearNorm(s, L, beta)]
    prob = BlockProblem(ops, A, np.zeros(nz + nt))
    return prob, {"W": W, "Y": Y, "theta_star": theta_star}, {"alpha": alpha, "beta": beta}


FAMILIES = {
    "nnls": nnls,
    "sparse_inv_cov": sparse_inv_cov,
    "l1_trend": l1_trend,
    "commodity_flow": commodity_flow,
    "optimal_control": optimal_control,
    "coupled_qp": coupled_qp,
    "multitask_logistic": multitask_logistic,
}

PRESETS = {
    "nnls": {"desk": dict(p=300, q=500), "large": dict(p=10000, q=8000)},
    "sparse_inv_cov": {"desk": dict(q=30), "large": dict(q=100)},
    "l1_trend": {"desk": dict(q=500), "large": dict(q=10**6)},
    "commodity_flow": {"desk": dict(p=40, q=70), "large": dict(p=4000, q=7000)},
    "optimal_control": {"desk": dict(p=8, q=15, L=6), "large": dict(p=80, q=150, L=20)},
    "coupled_qp": {"desk": dict(L=4, s=10, q_l=30, p_l=20),
                   "large": dict(L=8, s=50, q_l=300, p_l=200)},
    "multitask_logistic": {"desk": dict(p=30, s=50, L=3), "large": dict(p=300, s=500, L=10)},
}


def generate(family: str, seed: int = 0, preset: str = "desk", **sizes) -> Instance:
    """Build an instance of ``family`` from a preset, with keyword overrides."""
    try:
        gen = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}") from None
    try:
        base = dict(PRESETS[family][preset])
    except KeyError:
        raise ValueError(f"unknown preset {preset!r} for {family}") from None
    base.update(sizes)
    for key, val in base.items():
        if isinstance(val, (int, np.integer)) and not isinstance(val, bool) and val <= 0:
            raise ValueError(f"{key} must be positive")
    prob, data, params = gen(seed=seed, **base)
    return Instance(family, int(seed), base, prob, data, params)
