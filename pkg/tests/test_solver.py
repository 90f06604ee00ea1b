import numpy as np
import pytest

from a2dr import BlockProblem, Decision, SolverOptions, Status, solve
from a2dr.bench import generate
from a2dr.prox import Box, Nonneg, QuadFormPolyhedron, SoftThreshold, SumSquaresAffine, Zero
from a2dr.solver import (SafeguardState, pathology_monitor, safeguard_bound,
                         safeguard_decide)


def small_nnls(seed=0, p=30, q=20):
    r = np.random.default_rng(seed)
    F = r.standard_normal((p, q))
    g = r.standard_normal(p)
    prob = BlockProblem([SumSquaresAffine(F, g), Nonneg(q)],
                        np.hstack([np.eye(q), -np.eye(q)]), np.zeros(q))
    return prob, F, g


class TestOptions:
    def test_defaults(self):
        o = SolverOptions()
        assert (o.max_mem, o.eta, o.D, o.epsilon, o.R) == (10, 1e-8, 1e6, 1e-6, 10)
        assert (o.eps_abs, o.eps_rel, o.max_iter) == (1e-6, 1e-8, 1000)

    @pytest.mark.parametrize("bad", [dict(t=0.0), dict(R=0), dict(eta=0.0), dict(max_mem=-1),
                                     dict(eps_abs=-1.0), dict(regularization="x"),
                                     dict(threads=0), dict(epsilon=0.0)])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            SolverOptions(**bad).validate()

    def test_as_dict_hides_v0(self):
        assert SolverOptions(v0=np.ones(3)).as_dict()["v0"] == "given"


class TestSafeguard:
    def test_fresh_accept(self):
        st = SafeguardState(g0_norm=2.0)
        assert safeguard_decide(st, 2.0 * 1e6, 1e6, 1e-6, 10) is Decision.ACCEPT_AA
        assert (st.n_aa, st.r_aa, st.safeguard) == (1, 1, False)

    def test_skip_window(self):
        st = SafeguardState(g0_norm=1.0)
        safeguard_decide(st, 0.5, 1.0, 1e-6, 4)
        out = [safeguard_decide(st, 1e30, 1.0, 1e-6, 4) for _ in range(3)]
        assert out == [Decision.SKIP_CHECK_ACCEPT_AA] * 3
        assert st.n_aa == 4 and st.r_aa == 4
        # The window is over: the next call checks again.
        assert safeguard_decide(st, 1e30, 1.0, 1e-6, 4) is Decision.REJECT_AA
        assert st.r_aa == 0

    def test_reject(self):
        st = SafeguardState(g0_norm=1.0)
        assert safeguard_decide(st, 2.0, 1.0, 1e-6, 10) is Decision.REJECT_AA
        assert (st.n_aa, st.r_aa, st.safeguard) == (0, 0, True)

    def test_rejection_opens_skip_path(self):
        # After a rejection outside the first check, R_AA = 0 < R so the
        # following steps skip the check, as the counters dictate.
        st = SafeguardState(g0_norm=1.0)
        safeguard_decide(st, 0.5, 1.0, 1e-6, 2)
        safeguard_decide(st, 9.0, 1.0, 1e-6, 2)
        assert safeguard_decide(st, 9.0, 1.0, 1e-6, 2) is Decision.REJECT_AA
        assert safeguard_decide(st, 9.0, 1.0, 1e-6, 2) is Decision.SKIP_CHECK_ACCEPT_AA

    def test_bound_formula(self):
        st = SafeguardState(g0_norm=3.0, n_aa=20)
        assert safeguard_bound(st, 2.0, 0.5, 10) == pytest.approx(2.0 * 3.0 * 3.0 ** -1.5)


class TestPathologyMonitor:
    def test_too_short(self):
        assert pathology_monitor([1.0] * 10, [1.0] * 10, 1e-6, 1.0, window=50) is None

    def test_infeasible(self):
        p = pathology_monitor([1.0] * 60, [1.0] * 60, 1e-6, 0.5)
        assert p.status is Status.INFEASIBLE_CANDIDATE and p.estimate == 1.0

    def test_unbounded(self):
        p = pathology_monitor([0.5] * 60, [0.0] * 60, 1e-6, 0.5)
        assert p.status is Status.UNBOUNDED_CANDIDATE and p.estimate == 1.0

    def test_converging(self):
        d = list(np.geomspace(1, 1e-9, 100))
        assert pathology_monitor(d, d, 1e-6, 1.0) is None

    def test_slow_drift_not_flagged(self):
        d = list(1.0 / np.sqrt(np.arange(1, 2001)))
        assert pathology_monitor(d, d, 1e-8, 1.0) is None


class TestSolve:
    def test_one_step_fixed_point(self, rng):
        p = BlockProblem([Zero(3)], np.eye(3), np.zeros(3))
        res = solve(p, v0=rng.standard_normal(3))
        assert res.status is Status.SOLVED and res.num_iters == 1
        np.testing.assert_allclose(res.x, 0, atol=1e-12)

    def test_nnls_against_lstsq_oracle(self):
        p, F, g = small_nnls()
        from scipy.optimize import nnls

        z, rn = nnls(F, g)
        res = solve(p, eps_abs=1e-9, eps_rel=0, max_iter=3000)
        assert res.status is Status.SOLVED
        assert res.objective == pytest.approx(rn**2, rel=1e-7)
        np.testing.assert_allclose(res.x_blocks[1], z, atol=1e-5)

    def test_nnls_desk_instance_adaptive(self):
        res = solve(generate("nnls", seed=0).problem)
        assert res.status is Status.SOLVED and res.num_iters <= 1000
        assert res.residual_norms[-1] <= 1e-6 + 1e-8 * res.r0_norm

    def test_zero_safeguard_is_plain_drs(self):
        p, _, _ = small_nnls(1)
        a = solve(p, D=0.0, max_iter=200, eps_abs=0, eps_rel=0)
        b = solve(p, enable_aa=False, max_iter=200, eps_abs=0, eps_rel=0)
        assert all(d is Decision.REJECT_AA for d in a.decisions)
        assert np.array_equal(a.residual_norms, b.residual_norms)
        assert np.array_equal(a.x, b.x)

    def test_bit_reproducible(self):
        p, _, _ = small_nnls(2)
        a = solve(p, max_iter=300)
        b = solve(p, max_iter=300)
        assert np.array_equal(a.residual_norms, b.residual_norms)
        assert np.array_equal(a.x, b.x)

    def test_threads_do_not_change_iterates(self):
        p = generate("multitask_logistic", seed=1, p=10, s=8, L=3).problem
        a = solve(p, max_iter=100)
        b = solve(p, max_iter=100, threads=3)
        assert np.array_equal(a.residual_norms, b.residual_norms)

    def test_safeguard_accounting(self):
        p, _, _ = small_nnls(3)
        res = solve(p, max_iter=400, eps_abs=1e-10, eps_rel=0, R=3)
        accepted = [d in (Decision.ACCEPT_AA, Decision.SKIP_CHECK_ACCEPT_AA) for d in res.decisions]
        assert sum(accepted) == res.n_aa
        # Every check-passing acceptance satisfied the bound with the count at the time.
        n_aa = 0
        for d, g in zip(res.decisions, res.fixed_point_norms):
            if d is Decision.ACCEPT_AA:
                bound = 1e6 * res.g0_norm * (n_aa / 3 + 1.0) ** (-(1.0 + 1e-6))
                assert g <= bound
            if d in (Decision.ACCEPT_AA, Decision.SKIP_CHECK_ACCEPT_AA):
                n_aa += 1

    def test_history_lengths(self):
        p, _, _ = small_nnls(4)
        res = solve(p, max_iter=50, eps_abs=0, eps_rel=0)
        assert res.status is Status.MAX_ITERATIONS
        for arr in (res.primal_norms, res.dual_norms, res.residual_norms, res.fixed_point_norms,
                    res.step_norms):
            assert len(arr) == res.num_iters == 50
        solved = solve(p)
        assert len(solved.residual_norms) == solved.num_iters
        assert len(solved.step_norms) == solved.num_iters - 1

    def test_solved_implies_tolerance(self):
        p, _, _ = small_nnls(5)
        res = solve(p, eps_abs=1e-7, eps_rel=1e-9)
        assert res.status is Status.SOLVED
        assert res.residual_norms[-1] <= 1e-7 + 1e-9 * res.r0_norm

    def test_best_iterate(self):
        p, _, _ = small_nnls(6)
        res = solve(p, max_iter=30, eps_abs=0, eps_rel=0)
        assert res.best_iter == int(np.argmin(res.residual_norms)) + 1

    def test_inconsistent_linear_system(self):
        p = BlockProblem([Zero(1)], [[1.0], [1.0]], [0.0, 2.0])
        res = solve(p)
        assert res.status is Status.LINEAR_SYSTEM_INFEASIBLE
        assert res.presolve_residual == pytest.approx(np.sqrt(2))

    def test_unconstrained(self):
        p = BlockProblem([SoftThreshold(3, 1.0), Box(2, 1.0, 2.0)])
        res = solve(p)
        assert res.status is Status.SOLVED
        np.testing.assert_allclose(res.x, [0, 0, 0, 1, 1], atol=1e-6)

    def test_v0_length_checked(self):
        with pytest.raises(ValueError):
            solve(BlockProblem([Zero(2)], np.eye(2), np.zeros(2)), v0=np.zeros(3))

    def test_regularization_variants_solve(self):
        p, _, _ = small_nnls(7)
        for reg in ("adaptive", "constant", "none"):
            assert solve(p, regularization=reg, max_iter=3000).status is Status.SOLVED


class TestPathologies:
    def test_infeasible(self):
        p = BlockProblem([Box(1, 1.0, np.inf)], [[1.0]], [0.0])
        res = solve(p, max_iter=2000)
        assert res.status is Status.INFEASIBLE_CANDIDATE
        assert res.pathology.estimate == pytest.approx(1.0, abs=1e-3)

    def test_unbounded(self):
        p = BlockProblem([QuadFormPolyhedron([[0.0]], [1.0])], [[0.0]], [0.0])
        res = solve(p, max_iter=2000)
        assert res.status is Status.UNBOUNDED_CANDIDATE
        assert res.pathology.estimate == pytest.approx(1.0, abs=1e-3)

    def test_stop_on_pathology(self):
        p = BlockProblem([Box(1, 1.0, np.inf)], [[1.0]], [0.0])
        res = solve(p, max_iter=2000, stop_on_pathology=True)
        assert res.status is Status.INFEASIBLE_CANDIDATE and res.num_iters < 2000

    def test_solvable_never_flagged(self):
        p, _, _ = small_nnls(8)
        res = solve(p, enable_aa=False, eps_abs=1e-13, eps_rel=0, max_iter=3000)
        assert res.pathology is None
