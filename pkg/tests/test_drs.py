import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from a2dr.drs import (BlockProblem, ProxError, WarmState, check_stop, drs_step, eval_prox,
                      project_affine, residuals)
from a2dr.prox import Box, CustomProx, Nonneg, SoftThreshold, Zero
from a2dr.sparsela import SparseMatrix

from kinds import ALL_KINDS, random_input, random_operator, random_problem



class TestBlockProblem:
    def test_shapes(self):
        p = BlockProblem([Zero(2), Nonneg(3)], np.ones((1, 5)), [1.0])
        assert (p.N, p.n, p.m, p.sizes) == (2, 5, 1, [2, 3])
        assert p.A.block_widths == [2, 3]

    def test_column_mismatch(self):
        with pytest.raises(ValueError):
            BlockProblem([Zero(2)], np.ones((1, 3)), [1.0])

    def test_b_length_mismatch(self):
        with pytest.raises(ValueError):
            BlockProblem([Zero(2)], np.ones((1, 2)), [1.0, 2.0])

    def test_unconstrained(self):
        p = BlockProblem([Zero(2)])
        assert p.m == 0 and p.b.size == 0

    def test_objective(self):
        p = BlockProblem([SoftThreshold(2, 2.0), Nonneg(1)])
        assert p.objective(np.array([1.0, -1.0, 3.0])) == 4.0
        assert p.objective(np.array([1.0, -1.0, -3.0])) == np.inf


class TestProjection:
    def test_closed_form(self):
        p = BlockProblem([Zero(2)], [[1.0, 1.0]], [2.0])
        np.testing.assert_allclose(project_affine([0.0, 0.0], p), [1.0, 1.0])

    def test_feasible_point_fixed(self, rng):
        A = rng.standard_normal((2, 4))
        v = rng.standard_normal(4)
        p = BlockProblem([Zero(4)], A, A @ v)
        np.testing.assert_allclose(project_affine(v, p), v, atol=1e-10)

    def test_origin(self, rng):
        p = BlockProblem([Zero(3)], np.eye(3), np.zeros(3))
        np.testing.assert_allclose(project_affine(rng.standard_normal(3), p), 0, atol=1e-12)

    @given(st.integers(0, 10_000))
    def test_matches_pseudoinverse(self, seed):
        r = np.random.default_rng(seed)
        m, n = int(r.integers(1, 5)), int(r.integers(5, 9))
        A = r.standard_normal((m, n))
        b = r.standard_normal(m)
        v = r.standard_normal(n)
        p = BlockProblem([Zero(n)], A, b)
        expect = v - np.linalg.pinv(A) @ (A @ v - b)
        np.testing.assert_allclose(project_affine(v, p), expect, atol=1e-8)


class TestDrsStep:
    def setup_method(self):
        self.p = BlockProblem([Nonneg(1)], [[1.0]], [1.0])

    def test_hand_trace(self):
        s = drs_step([-1.0], self.p, 1.0)
        np.testing.assert_allclose([s.x_half[0], s.v_half[0], s.x_next[0], s.v_next[0]], [0, 1, 1, 0])

    def test_fixed_point(self):
        s = drs_step([1.0], self.p, 1.0)
        assert s.x_half[0] == 1.0 and s.v_next[0] == pytest.approx(1.0)
        assert s.g[0] == pytest.approx(0.0)

    def test_zero_function_origin(self, rng):
        p = BlockProblem([Zero(3)], np.eye(3), np.zeros(3))
        np.testing.assert_allclose(drs_step(rng.standard_normal(3), p, 0.3).v_next, 0, atol=1e-12)

    def test_identities(self, rng):
        p = random_problem(rng)
        v = rng.standard_normal(p.n)
        s = drs_step(v, p, 0.7)
        assert np.array_equal(s.v_next, v + s.x_next - s.x_half)
        assert np.array_equal(s.g, v - s.v_next)
        np.testing.assert_allclose(p.A.matvec(s.x_next), p.b, atol=1e-8)

    def test_prox_failure_names_block(self):
        bad = CustomProx(1, lambda v, t: np.array([np.nan]))
        p = BlockProblem([Zero(1), bad], np.ones((1, 2)), [0.0])
        with pytest.raises(ProxError) as err:
            drs_step(np.zeros(2), p, 1.0)
        assert err.value.block == 1

    def test_parallel_matches_serial(self, rng):
        from concurrent.futures import ThreadPoolExecutor

        p = random_problem(rng, kinds=["soft_threshold", "logistic", "nuclear_norm", "box"])
        v = rng.standard_normal(p.n)
        with ThreadPoolExecutor(4) as ex:
            par = eval_prox(v, p, 0.5, ex)
        assert np.array_equal(par, eval_prox(v, p, 0.5))


@pytest.mark.parametrize("seed", range(10))
def test_half_averaged(seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng)
    for _ in range(10):
        u, v = 3 * rng.standard_normal(p.n), 3 * rng.standard_normal(p.n)
        t = float(np.exp(rng.uniform(-2, 1)))
        su, sv = drs_step(u, p, t), drs_step(v, p, t)
        lhs = np.sum((su.v_next - sv.v_next) ** 2) + np.sum((su.g - sv.g) ** 2)
        assert lhs <= np.sum((u - v) ** 2) + 1e-8


def test_fejer_monotone():
    # Box-constrained consensus with a known fixed point.
    rng = np.random.default_rng(4)
    p = BlockProblem([Box(3, -1.0, 1.0), SoftThreshold(3, 0.3)],
                     np.hstack([np.eye(3), -np.eye(3)]), np.zeros(3))
    v = 5 * rng.standard_normal(6)
    state = WarmState()
    for _ in range(3000):
        v = drs_step(v, p, 1.0, state).v_next
    v_star = v
    v = 5 * rng.standard_normal(6)
    dist = np.linalg.norm(v - v_star)
    for _ in range(200):
        v = drs_step(v, p, 1.0).v_next
        new = np.linalg.norm(v - v_star)
        assert new <= dist + 1e-9
        dist = new


class TestResiduals:
    def test_optimal_point(self):
        p = BlockProblem([Zero(2)], [[1.0, 1.0]], [2.0])
        r = residuals(np.array([1.0, 1.0]), np.array([1.0, 1.0]), p, 1.0)
        assert r.prim_norm == 0 and r.dual_norm == pytest.approx(0, abs=1e-14)
        np.testing.assert_allclose(r.lam, 0, atol=1e-14)

    def test_dual_recovery(self):
        p = BlockProblem([Zero(2)], [[1.0, 1.0]], [0.0])
        r = residuals(np.zeros(2), np.ones(2), p, 1.0)
        np.testing.assert_allclose(r.lam, [1.0])
        np.testing.assert_allclose(r.r_dual, [0.0, 0.0], atol=1e-12)

    def test_orthogonal_gradient(self):
        p = BlockProblem([Zero(2)], [[1.0, 1.0]], [0.0])
        r = residuals(np.array([1.0, -1.0]), np.zeros(2), p, 2.0)
        np.testing.assert_allclose(r.r_dual, [0.5, -0.5], atol=1e-12)
        assert r.norm == pytest.approx(np.sqrt(0.5))

    def test_lengths(self, rng):
        p = random_problem(rng)
        v = rng.standard_normal(p.n)
        r = residuals(v, eval_prox(v, p, 1.0), p, 1.0)
        assert r.r_prim.size == p.m and r.r_dual.size == p.n and r.lam.size == p.m


class TestCheckStop:
    def test_zero(self):
        assert check_stop(0.0, 5.0, 1e-6, 1e-8)

    def test_arithmetic(self):
        assert not check_stop(1.2e-6, 10.0, 1e-6, 1e-8)

    def test_inclusive(self):
        assert check_stop(1e-6 + 1e-8 * 10.0, 10.0, 1e-6, 1e-8)
