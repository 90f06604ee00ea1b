import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from a2dr import BACKEND, _pykernels

try:
    from a2dr import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])
ids = [k.NAME for k in BACKENDS]


def coo(seed, m=30, n=20, density=0.2):
    A = sp.random(m, n, density=density, random_state=np.random.RandomState(seed), format="coo")
    return A, A.row.astype(np.int64), A.col.astype(np.int64), A.data.astype(float)


def test_compiled_backend_selected_when_built():
    forced = os.environ.get("A2DR_PURE_PYTHON", "").strip() in ("1", "true", "yes")
    if _ckernels is None or forced:
        assert BACKEND == "python"
    else:
        assert BACKEND == _ckernels.NAME != _pykernels.NAME


def test_pure_python_forced_by_environment():
    env = dict(os.environ, A2DR_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import a2dr; print(a2dr.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("k", BACKENDS, ids=ids)
@given(st.integers(0, 10_000))
@settings(max_examples=25)
def test_matvec_against_scipy(k, seed):
    A, r, c, v = coo(seed)
    x = np.random.default_rng(seed).standard_normal(20)
    y = np.random.default_rng(seed + 1).standard_normal(30)
    np.testing.assert_allclose(k.coo_matvec(r, c, v, x, 30), A @ x, atol=1e-12)
    np.testing.assert_allclose(k.coo_rmatvec(r, c, v, y, 20), A.T @ y, atol=1e-12)


@pytest.mark.parametrize("k", BACKENDS, ids=ids)
@given(st.integers(0, 10_000))
@settings(max_examples=25)
def test_lsqr_against_normal_equations(k, seed):
    A, r, c, v = coo(seed, 40, 15, 0.3)
    b = np.random.default_rng(seed).standard_normal(40)
    x, itn, rnorm = k.lsqr(r, c, v, 40, 15, b, 1e-12, 500)
    xs = spla.lsqr(A.tocsr(), b, atol=1e-14, btol=1e-14, iter_lim=2000)[0]
    Ad = A.toarray()
    # compare optimality, since rank-deficient A has many minimizers
    assert np.linalg.norm(Ad.T @ (Ad @ x - b)) <= 1e-8 * max(1.0, np.linalg.norm(b))
    assert np.linalg.norm(Ad @ x - b) == pytest.approx(np.linalg.norm(Ad @ xs - b), rel=1e-8, abs=1e-10)
    assert rnorm == pytest.approx(np.linalg.norm(Ad @ x - b), rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("k", BACKENDS, ids=ids)
def test_lsqr_zero_rhs(k):
    _, r, c, v = coo(0)
    x, itn, rnorm = k.lsqr(r, c, v, 30, 20, np.zeros(30), 1e-10, 100)
    assert itn == 0 and rnorm == 0.0 and not x.any()


@pytest.mark.parametrize("k", BACKENDS, ids=ids)
@given(st.integers(0, 10_000), st.integers(1, 12))
@settings(max_examples=25)
def test_eigh_against_lapack(k, seed, n):
    M = np.random.default_rng(seed).standard_normal((n, n))
    S = M + M.T
    w, V = k.jacobi_eigh(S)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(S), atol=1e-10 * max(1, np.abs(S).max()))
    np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(V @ np.diag(w) @ V.T, S, atol=1e-9)


@pytest.mark.parametrize("k", BACKENDS, ids=ids)
@given(st.integers(0, 10_000), st.integers(1, 10), st.integers(1, 10))
@settings(max_examples=25)
def test_svd_against_lapack(k, seed, m, n):
    M = np.random.default_rng(seed).standard_normal((m, n))
    u, s, vt = k.jacobi_svd(M)
    np.testing.assert_allclose(s, np.linalg.svd(M, compute_uv=False), atol=1e-10)
    np.testing.assert_allclose(u @ np.diag(s) @ vt, M, atol=1e-9)


@pytest.mark.parametrize("k", BACKENDS, ids=ids)
@given(st.integers(0, 10_000), st.floats(0.01, 10))
@settings(max_examples=25)
def test_logistic_stationarity(k, seed, t):
    r = np.random.default_rng(seed)
    v = r.standard_normal(50) * 5
    y = np.where(r.random(50) < 0.5, -1.0, 1.0)
    x = k.logistic_prox(v, t, y)
    grad = -y / (1 + np.exp(y * x)) + (x - v) / t
    np.testing.assert_allclose(grad, 0.0, atol=1e-9)


@pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")
def test_backends_agree(rng):
    A, r, c, v = coo(3, 60, 40, 0.1)
    b = rng.standard_normal(60)
    xp, ip, _ = _pykernels.lsqr(r, c, v, 60, 40, b, 1e-12, 200)
    xc, ic, _ = _ckernels.lsqr(r, c, v, 60, 40, b, 1e-12, 200)
    np.testing.assert_allclose(xp, xc, rtol=1e-9, atol=1e-12)
    S = rng.standard_normal((8, 8))
    S = S + S.T
    np.testing.assert_allclose(_pykernels.jacobi_eigh(S)[0], _ckernels.jacobi_eigh(S)[0], atol=1e-12)
    labels = np.where(rng.random(30) < 0.5, -1.0, 1.0)
    vv = rng.standard_normal(30)
    np.testing.assert_allclose(_pykernels.logistic_prox(vv, 0.7, labels),
                               _ckernels.logistic_prox(vv, 0.7, labels), atol=1e-12)
