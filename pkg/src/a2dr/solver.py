"""Anderson-accelerated Douglas-Rachford splitting with a safeguard."""
from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .accel import AaMemory, candidate
from .drs import BlockProblem, WarmState, check_stop, drs_step, residuals
from .precond import Equilibration, equilibrate, presolve_check, rescale_problem
from .sparsela import SparseMatrix

__all__ = [
    "Status",
    "Decision",
    "SolverOptions",
    "SafeguardState",
    "Pathology",
    "SolverResult",
    "safeguard_decide",
    "safeguard_bound",
    "pathology_monitor",
    "solve",
]


class Status(str, enum.Enum):
    SOLVED = "Solved"
    MAX_ITERATIONS = "MaxIterations"
    INFEASIBLE_CANDIDATE = "InfeasibleCandidate"
    UNBOUNDED_CANDIDATE = "UnboundedCandidate"
    LINEAR_SYSTEM_INFEASIBLE = "LinearSystemInfeasible"


class Decision(str, enum.Enum):
    ACCEPT_AA = "AcceptAA"
    REJECT_AA = "RejectAA"
    SKIP_CHECK_ACCEPT_AA = "SkipCheckAcceptAA"
    NO_AA = "NoAA"


@dataclass
class SolverOptions:
    """Solver parameters.

    ``t=None`` picks the step size from the equilibration (0.1 without it).
    ``regularization`` selects how the Anderson least-squares problem is
    damped: ``"adaptive"`` (default), ``"constant"`` (``mu = eta``) or
    ``"none"``. ``v0`` is the starting point in the coordinates of the
    (possibly scaled) problem that is iterated on.
    """

    t: float | None = None
    eta: float = 1e-8
    D: float = 1e6
    epsilon: float = 1e-6
    R: int = 10
    max_mem: int = 10
    eps_abs: float = 1e-6
    eps_rel: float = 1e-8
    max_iter: int = 1000
    enable_aa: bool = True
    enable_precond: bool = True
    v0: np.ndarray | None = None
    regularization: str = "adaptive"
    threads: int = 1
    lsqr_tol: float = 1e-10
    presolve_tol: float = 1e-8
    pathology_window: int = 50
    stall_tol: float = 1e-3
    drift_tol: float = 1e-2
    stop_on_pathology: bool = False

    def validate(self) -> None:
        if self.t is not None and not self.t > 0:
            raise ValueError("t must be positive")
        if self.eta < 0 or (self.regularization == "adaptive" and self.eta == 0):
            raise ValueError("eta must be positive")
        if self.D < 0 or not self.epsilon > 0:
            raise ValueError("D must be nonnegative and epsilon positive")
        if self.R < 1:
            raise ValueError("R must be at least 1")
        if self.max_mem < 0 or self.max_iter < 0:
            raise ValueError("max_mem and max_iter must be nonnegative")
        if not (self.eps_abs >= 0 and self.eps_rel >= 0):
            raise ValueError("tolerances must be nonnegative")
        if self.regularization not in ("adaptive", "constant", "none"):
            raise ValueError(f"unknown regularization {self.regularization!r}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def as_dict(self) -> dict:
        out = asdict(self)
        out["v0"] = None if self.v0 is None else "given"
        return out


@dataclass
class SafeguardState:
    g0_norm: float
    n_aa: int = 0
    r_aa: int = 0
    safeguard: bool = True


def safeguard_bound(state: SafeguardState, D: float, epsilon: float, R: int) -> float:
    return D * state.g0_norm * (state.n_aa / R + 1.0) ** (-(1.0 + epsilon))


def safeguard_decide(state: SafeguardState, g_norm: float, D: float, epsilon: float,
                     R: int) -> Decision:
    """Three-way safeguard; updates the counters in ``state``."""
    if state.safeguard or state.r_aa >= R:
        if g_norm <= safeguard_bound(state, D, epsilon, R):
            state.n_aa += 1
            state.safeguard = False
            state.r_aa = 1
            return Decision.ACCEPT_AA
        state.r_aa = 0
        return Decision.REJECT_AA
    state.n_aa += 1
    state.r_aa += 1
    return Decision.SKIP_CHECK_ACCEPT_AA


@dataclass
class Pathology:
    status: Status
    estimate: float
    iteration: int


def pathology_monitor(delta_norms, prim_norms, eps_tol: float, t: float,
                      window: int = 50, stall_tol: float = 1e-3,
                      drift_tol: float = 1e-2) -> Pathology | None:
    """Flag a stalled, nonzero ``||v^k - v^{k+1}||`` as a pathology candidate.

    Over the last ``window`` iterations the step norms must have relative
    spread at most ``stall_tol`` and stay above ``10 * eps_tol``. To avoid
    flagging slow but convergent runs, the current step norm must also be
    within ``drift_tol`` (relative) of the one at iteration ``k // 2``. If
    the primal residual stayed within ``eps_tol`` the problem is reported as
    unbounded with estimate ``||dv|| / t``, otherwise as infeasible with
    estimate ``||dv||``.
    """
    k = len(delta_norms)
    if window < 1 or k < window or len(prim_norms) < window:
        return None
    d = np.asarray(delta_norms[-window:], dtype=float)
    p = np.asarray(prim_norms[-window:], dtype=float)
    lo, hi = float(d.min()), float(d.max())
    if lo < 10.0 * eps_tol or (hi - lo) > stall_tol * hi:
        return None
    last = float(d[-1])
    if abs(last - float(delta_norms[k // 2])) > drift_tol * last:
        return None
    if float(p.max()) <= eps_tol:
        return Pathology(Status.UNBOUNDED_CANDIDATE, last / t, k)
    return Pathology(Status.INFEASIBLE_CANDIDATE, last, k)


@dataclass
class SolverResult:
    """Output of :func:`solve`.

    The residual arrays hold iterations ``k = 1..num_iters``; the residual
    at the starting point is ``r0_norm``. ``step_norms`` and ``decisions``
    cover the steps actually taken, so they are one shorter when the run
    stops on the tolerance. ``g0_norm`` is ``||g^0||`` from the seed step,
    the reference for the safeguard bound. Residuals and step norms are measured on the
    problem the solver iterates on (the scaled problem when preconditioning
    is enabled); ``x_blocks`` and ``lam`` are in the original coordinates.
    """

    status: Status
    x_blocks: list
    lam: np.ndarray
    primal_norms: np.ndarray
    dual_norms: np.ndarray
    residual_norms: np.ndarray
    fixed_point_norms: np.ndarray
    step_norms: np.ndarray
    decisions: list
    num_iters: int
    solve_time: float
    delta_v: np.ndarray
    r0_norm: float
    eps_tol: float
    t: float
    best_iter: int
    n_aa: int
    objective: float
    equilibration: Equilibration | None = None
    pathology: Pathology | None = None
    presolve_residual: float = 0.0
    g0_norm: float = float("nan")
    work_A: SparseMatrix | None = field(default=None, repr=False)

    @property
    def x(self) -> np.ndarray:
        return np.concatenate(self.x_blocks) if self.x_blocks else np.zeros(0)

    def iterations_to(self, tol: float) -> int | None:
        """First iteration whose residual norm is at most ``tol``."""
        hit = np.flatnonzero(self.residual_norms <= tol)
        return int(hit[0]) + 1 if hit.size else None


def solve(problem: BlockProblem, opts: SolverOptions | None = None, **overrides) -> SolverResult:
    """Run A2DR (or plain DRS with ``enable_aa=False``) on ``problem``."""
    opts = opts if opts is not None else SolverOptions()
    if overrides:
        opts = SolverOptions(**{**opts.__dict__, **overrides})
    opts.validate()
    start = time.perf_counter()

    presolve_residual = 0.0
    if problem.m > 0:
        pre = presolve_check(problem.A, problem.b, opts.presolve_tol)
        presolve_residual = pre.residual
        if not pre.feasible:
            return _infeasible_system(problem, pre, time.perf_counter() - start)

    if opts.enable_precond:
        eq = equilibrate(problem.A)
        work, unscale = rescale_problem(problem, eq)
        t = opts.t if opts.t is not None else eq.t
    else:
        eq = None
        work, unscale = problem, None
        t = opts.t if opts.t is not None else 0.1
    work.reset()

    executor = ThreadPoolExecutor(max_workers=opts.threads) if opts.threads > 1 else None
    try:
        out = _iterate(work, t, opts, executor)
    finally:
        if executor is not None:
            executor.shutdown()

    x_hat, lam_hat = out.pop("x_hat"), out.pop("lam_hat")
    if unscale is not None:
        x, lam = unscale(x_hat), unscale.dual(lam_hat)
    else:
        x, lam = x_hat, lam_hat
    x_blocks = problem.split(x)
    try:
        objective = problem.objective(x_blocks)
    except NotImplementedError:
        objective = float("nan")
    return SolverResult(
        x_blocks=x_blocks,
        lam=lam,
        solve_time=time.perf_counter() - start,
        t=t,
        objective=objective,
        equilibration=eq,
        presolve_residual=presolve_residual,
        work_A=work.A,
        **out,
    )


def _iterate(work: BlockProblem, t: float, opts: SolverOptions, executor) -> dict:
    n = work.n
    v = np.zeros(n) if opts.v0 is None else np.array(opts.v0, dtype=float).ravel()
    if v.size != n:
        raise ValueError(f"v0 has length {v.size}, expected {n}")
    warm = WarmState(executor=executor, lsqr_tol=opts.lsqr_tol)

    # Seed step: v^1 = F(v^0), g^0 = v^0 - v^1.
    step = drs_step(v, work, t, warm)
    res = residuals(v, step.x_half, work, t, warm)
    r0_norm = res.norm
    eps_tol = opts.eps_abs + opts.eps_rel * r0_norm
    g_prev = step.g
    v_prev = v
    v = step.v_next
    delta_v = g_prev.copy()
    best_norm, best_x, best_lam, best_iter = res.norm, step.x_half, res.lam, 0

    use_aa = opts.enable_aa and opts.max_mem > 0
    mem = AaMemory(opts.max_mem)
    mem.push_drs(step.v_next)
    sg = SafeguardState(g0_norm=float(np.linalg.norm(g_prev)))

    prim, dual, total, gnorm, steps, decisions = [], [], [], [], [], []
    status = Status.MAX_ITERATIONS
    pathology = None
    for k in range(1, opts.max_iter + 1):
        step = drs_step(v, work, t, warm)
        g = step.g
        res = residuals(v, step.x_half, work, t, warm)
        g_norm = float(np.linalg.norm(g))
        prim.append(res.prim_norm)
        dual.append(res.dual_norm)
        total.append(res.norm)
        gnorm.append(g_norm)
        if res.norm < best_norm:
            best_norm, best_x, best_lam, best_iter = res.norm, step.x_half, res.lam, k
        if check_stop(res, r0_norm, opts.eps_abs, opts.eps_rel):
            status = Status.SOLVED
            break

        if use_aa:
            mem.push(v - v_prev, g - g_prev)
            mem.push_drs(step.v_next)
            decision = safeguard_decide(sg, g_norm, opts.D, opts.epsilon, opts.R)
            if decision is Decision.REJECT_AA:
                v_next = step.v_next
            else:
                v_next = candidate(mem, g, opts.eta, regularization=opts.regularization).v_aa
        else:
            decision = Decision.NO_AA
            v_next = step.v_next
        decisions.append(decision)

        delta_v = v - v_next
        steps.append(float(np.linalg.norm(delta_v)))
        v_prev, g_prev, v = v, g, v_next

        found = pathology_monitor(steps, prim, eps_tol, t, opts.pathology_window,
                                   opts.stall_tol, opts.drift_tol)
        if found is not None:
            pathology = found
            if opts.stop_on_pathology:
                status = found.status
                break
        elif pathology is not None and k - pathology.iteration >= opts.pathology_window:
            # The stall ended; drop the stale classification.
            pathology = None

    if status is Status.MAX_ITERATIONS and pathology is not None:
        status = pathology.status

    return dict(
        status=status,
        x_hat=best_x,
        lam_hat=best_lam,
        primal_norms=np.array(prim),
        dual_norms=np.array(dual),
        residual_norms=np.array(total),
        fixed_point_norms=np.array(gnorm),
        step_norms=np.array(steps),
        decisions=decisions,
        num_iters=len(total),
        delta_v=delta_v,
        r0_norm=r0_norm,
        eps_tol=eps_tol,
        best_iter=best_iter,
        n_aa=sg.n_aa,
        pathology=pathology,
        g0_norm=sg.g0_norm,
    )


def _infeasible_system(problem: BlockProblem, pre, elapsed: float) -> SolverResult:
    empty = np.zeros(0)
    return SolverResult(
        status=Status.LINEAR_SYSTEM_INFEASIBLE,
        x_blocks=problem.split(pre.x_ls),
        lam=np.zeros(problem.m),
        primal_norms=empty,
        dual_norms=empty,
        residual_norms=empty,
        fixed_point_norms=empty,
        step_norms=empty,
        decisions=[],
        num_iters=0,
        solve_time=elapsed,
        delta_v=np.zeros(problem.n),
        r0_norm=float("nan"),
        eps_tol=float("nan"),
        t=float("nan"),
        best_iter=0,
        n_aa=0,
        objective=float("nan"),
        presolve_residual=pre.residual,
    )
