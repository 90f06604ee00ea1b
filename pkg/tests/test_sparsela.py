import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from a2dr.sparsela import (SparseMatrix, default_max_iter, lsqr_solve, matvec,
                           ridge_lstsq, rmatvec, spectral_norm)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def dense_matrices(max_side=6):
    shape = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shape.flatmap(lambda s: hnp.arrays(float, s, elements=finite))


class TestConstruction:
    def test_duplicates_summed_and_sorted(self):
        A = SparseMatrix((2, 2), [1, 0, 1], [0, 1, 0], [1.0, 2.0, 3.0])
        assert A.nnz == 2
        np.testing.assert_array_equal(A.to_dense(), [[0, 2], [4, 0]])
        assert list(zip(A.cols, A.rows)) == sorted(zip(A.cols, A.rows))

    def test_out_of_range_index_rejected(self):
        with pytest.raises(ValueError):
            SparseMatrix((2, 2), [2], [0], [1.0])

    def test_bad_offsets_rejected(self):
        with pytest.raises(ValueError):
            SparseMatrix((1, 3), [0], [0], [1.0], col_offsets=[0, 2, 2, 3])
        with pytest.raises(ValueError):
            SparseMatrix((1, 3), [0], [0], [1.0], col_offsets=[0, 2])

    def test_hstack_sets_blocks(self):
        A = SparseMatrix.hstack([np.eye(2), sp.csr_matrix(np.ones((2, 3)))])
        assert A.block_widths == [2, 3]
        np.testing.assert_array_equal(A.block(1).to_dense(), np.ones((2, 3)))

    def test_hstack_row_mismatch(self):
        with pytest.raises(ValueError):
            SparseMatrix.hstack([np.eye(2), np.eye(3)])

    def test_scipy_round_trip(self, rng):
        M = sp.random(7, 5, density=0.4, random_state=1)
        A = SparseMatrix.from_scipy(M)
        np.testing.assert_array_equal(A.to_scipy().toarray(), M.toarray())
        assert A == SparseMatrix.from_dense(M.toarray())

    def test_scaled(self, rng):
        M = rng.standard_normal((3, 4))
        d, e = rng.random(3) + 0.5, rng.random(4) + 0.5
        A = SparseMatrix.from_dense(M).scaled(d, e)
        np.testing.assert_allclose(A.to_dense(), np.diag(d) @ M @ np.diag(e))

    def test_transpose(self, rng):
        M = rng.standard_normal((3, 5))
        np.testing.assert_array_equal(SparseMatrix.from_dense(M).T.to_dense(), M.T)


class TestMatvec:
    def test_identity(self):
        np.testing.assert_array_equal(matvec(SparseMatrix.identity(2), [3, 5]), [3, 5])

    def test_row_sum(self):
        np.testing.assert_array_equal(matvec(SparseMatrix.from_dense([[1, 1]]), [2, 3]), [5])

    def test_permutation(self):
        np.testing.assert_array_equal(matvec(SparseMatrix.from_dense([[0, 2], [3, 0]]), [1, 1]), [2, 3])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matvec(SparseMatrix.identity(2), [1, 2, 3])

    @given(dense_matrices(), st.data())
    def test_matches_dense_product(self, M, data):
        x = data.draw(hnp.arrays(float, M.shape[1], elements=finite))
        y = data.draw(hnp.arrays(float, M.shape[0], elements=finite))
        A = SparseMatrix.from_dense(M)
        np.testing.assert_allclose(matvec(A, x), M @ x, atol=1e-9)
        np.testing.assert_allclose(rmatvec(A, y), M.T @ y, atol=1e-9)

    @given(dense_matrices(), st.data(), finite, finite)
    def test_linearity(self, M, data, a, b):
        x = data.draw(hnp.arrays(float, M.shape[1], elements=finite))
        y = data.draw(hnp.arrays(float, M.shape[1], elements=finite))
        A = SparseMatrix.from_dense(M)
        lhs = matvec(A, a * x + b * y)
        rhs = a * matvec(A, x) + b * matvec(A, y)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(rhs).max()) * 1e3)

    @given(dense_matrices(), st.data())
    def test_adjoint_identity(self, M, data):
        x = data.draw(hnp.arrays(float, M.shape[1], elements=finite))
        y = data.draw(hnp.arrays(float, M.shape[0], elements=finite))
        A = SparseMatrix.from_dense(M)
        scale = 1 + np.abs(M).sum() * 100
        assert abs(matvec(A, x) @ y - x @ rmatvec(A, y)) <= 1e-10 * scale

    def test_deterministic(self, rng):
        A = SparseMatrix.from_scipy(sp.random(50, 40, density=0.2, random_state=3))
        x = rng.standard_normal(40)
        assert np.array_equal(matvec(A, x), matvec(A, x))


class TestLsqr:
    def test_identity(self):
        np.testing.assert_allclose(lsqr_solve(SparseMatrix.identity(2), [1, 2]).x, [1, 2])

    def test_scalar(self):
        np.testing.assert_allclose(lsqr_solve(SparseMatrix.from_dense([[2.0]]), [4]).x, [2])

    def test_overdetermined_normal_equations(self):
        np.testing.assert_allclose(lsqr_solve(SparseMatrix.from_dense([[1.0], [1.0]]), [1, 3]).x, [2])

    def test_reports_iterations_and_residual(self):
        res = lsqr_solve(SparseMatrix.from_dense([[1.0], [1.0]]), [1, 3])
        assert res.iterations >= 1
        assert res.residual_norm == pytest.approx(np.sqrt(2), rel=1e-8)

    def test_default_cap(self):
        assert default_max_iter(SparseMatrix.zeros(3, 7)) == 2 * 3 + 50

    def test_zero_rhs(self):
        assert np.all(lsqr_solve(SparseMatrix.identity(3), np.zeros(3)).x == 0)

    def test_square_systems_match_direct_solve(self):
        # Well-conditioned random systems: diagonally shifted Gaussian.
        rng = np.random.default_rng(7)
        tol = 1e-10
        for _ in range(20):
            n = int(rng.integers(2, 15))
            M = rng.standard_normal((n, n)) + 3 * np.sqrt(n) * np.eye(n)
            b = rng.standard_normal(n)
            x = lsqr_solve(SparseMatrix.from_dense(M), b, tol=tol).x
            exact = np.linalg.solve(M, b)
            assert np.linalg.norm(x - exact) <= 10 * tol * np.linalg.norm(exact) * np.linalg.cond(M)

    def test_warm_start_never_worse(self, rng):
        M = rng.standard_normal((30, 12))
        b = rng.standard_normal(30)
        A = SparseMatrix.from_dense(M)
        exact = np.linalg.lstsq(M, b, rcond=None)[0]
        for warm in (exact, exact + 0.1 * rng.standard_normal(12), 100 * rng.standard_normal(12)):
            x = lsqr_solve(A, b, warm_start=warm).x
            np.testing.assert_allclose(x, exact, atol=1e-8)

    def test_rank_deficient_least_squares(self, rng):
        M = rng.standard_normal((10, 3)) @ rng.standard_normal((3, 6))
        b = rng.standard_normal(10)
        x = lsqr_solve(SparseMatrix.from_dense(M), b).x
        # Normal equations hold even without a unique solution.
        np.testing.assert_allclose(M.T @ (M @ x - b), 0, atol=1e-8)


class TestRidge:
    def test_scalar_formula(self):
        np.testing.assert_allclose(ridge_lstsq(np.array([[1.0]]), [2.0], 1.0), [1.0])

    def test_unregularized_column(self):
        np.testing.assert_allclose(ridge_lstsq(np.array([[1.0], [0.0]]), [3.0, 4.0], 0.0), [3.0])

    def test_zero_rhs(self, rng):
        assert np.all(ridge_lstsq(rng.standard_normal((6, 3)), np.zeros(6), 0.5) == 0)

    def test_min_norm_when_rank_deficient(self):
        Y = np.array([[1.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(ridge_lstsq(Y, [2.0, 0.0], 0.0), [1.0, 1.0])

    def test_rank_deficient_with_mu(self):
        Y = np.array([[1.0, 1.0], [1.0, 1.0]])
        assert np.all(np.isfinite(ridge_lstsq(Y, [1.0, 2.0], 1e-3)))

    def test_negative_mu_rejected(self):
        with pytest.raises(ValueError):
            ridge_lstsq(np.eye(2), [1.0, 1.0], -1.0)

    @given(st.integers(0, 10_000), st.sampled_from([1e-6, 1e-2, 1.0, 10.0]))
    def test_stationarity(self, seed, mu):
        r = np.random.default_rng(seed)
        Y = r.standard_normal((20, 5))
        g = r.standard_normal(20)
        gamma = ridge_lstsq(Y, g, mu)
        resid = Y.T @ (Y @ gamma - g) + mu * gamma
        assert np.linalg.norm(resid) <= 1e-10 * (np.linalg.norm(Y.T @ g) + 1)


def test_spectral_norm_matches_svd(rng):
    M = rng.standard_normal((15, 9))
    assert spectral_norm(SparseMatrix.from_dense(M), iters=200) == pytest.approx(
        np.linalg.norm(M, 2), rel=1e-6)
