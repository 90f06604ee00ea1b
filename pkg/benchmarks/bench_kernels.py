"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the ``A2DR_PURE_PYTHON`` setting
does not matter here. Each line reports the best-of-``repeat`` wall time
per call and the speedup of the compiled version. The compiled timings are
skipped when the extension has not been built.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np
import scipy.sparse as sp

from a2dr import _pykernels

try:
    from a2dr import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _cases(rng):
    A = sp.random(2000, 1500, density=0.005, random_state=np.random.RandomState(0), format="coo")
    rows = A.row.astype(np.int64)
    cols = A.col.astype(np.int64)
    vals = A.data.astype(float)
    x = rng.standard_normal(1500)
    y = rng.standard_normal(2000)
    S = rng.standard_normal((40, 40))
    S = S + S.T
    M = rng.standard_normal((50, 10))
    v = rng.standard_normal(5000)
    labels = np.where(rng.random(5000) < 0.5, -1.0, 1.0)
    return {
        "coo_matvec (2000x1500, 15k nnz)": lambda k: k.coo_matvec(rows, cols, vals, x, 2000),
        "coo_rmatvec (2000x1500, 15k nnz)": lambda k: k.coo_rmatvec(rows, cols, vals, y, 1500),
        "lsqr (2000x1500, 50 iterations)": lambda k: k.lsqr(rows, cols, vals, 2000, 1500, y, 0.0, 50),
        "jacobi_eigh (40x40)": lambda k: k.jacobi_eigh(S),
        "jacobi_svd (50x10)": lambda k: k.jacobi_svd(M),
        "logistic_prox (n=5000)": lambda k: k.logistic_prox(v, 0.5, labels),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, call in _cases(rng).items():
        py = min(timeit.repeat(lambda: call(_pykernels), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:36s} {1e3 * py:12.3f} {'n/a':>12s} {'n/a':>8s}")
            continue
        cy = min(timeit.repeat(lambda: call(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:36s} {1e3 * py:12.3f} {1e3 * cy:12.3f} {py / cy:8.1f}x")


if __name__ == "__main__":
    main()
