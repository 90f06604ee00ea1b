"""Versioned JSON problem and result files.

Floats are written with 17 significant digits so that they round-trip
exactly. Infinite and NaN values, which JSON lacks, are written as the
strings ``"inf"``, ``"-inf"`` and ``"nan"``. Matrices use tagged objects::

    {"type": "sparse", "shape": [m, n], "triplets": [[i, j, v], ...]}
    {"type": "dense", "shape": [m, n], "data": [row-major values]}
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .drs import BlockProblem
from .prox import KINDS, ProxOperator, ScaledProx, make_prox
from .sparsela import SparseMatrix

__all__ = [
    "FORMAT_VERSION",
    "ProblemFileError",
    "dumps",
    "problem_to_dict",
    "problem_from_dict",
    "write_problem",
    "read_problem",
    "result_to_dict",
    "problems_equal",
]

FORMAT_VERSION = 1
_SPECIAL = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


class ProblemFileError(ValueError):
    """The problem file is malformed or describes an invalid problem."""


def _num(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == int(x) and abs(x) < 1e16:
        return repr(float(x))
    return format(x, ".17g")


def dumps(obj: Any, indent: int | None = 1) -> str:
    """Serialize ``obj`` to JSON with 17-digit floats and deterministic layout."""
    parts: list[str] = []
    _emit(obj, parts, indent, 0)
    return "".join(parts) + "\n"


def _emit(obj, out, indent, level):
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_num(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out, indent, level)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + pad + json.dumps(str(k)) + ": ")
            _emit(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        # Numeric lists stay on one line; nested structures are indented.
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj)
        if flat or indent is None:
            out.append("[")
            for i, v in enumerate(obj):
                if i:
                    out.append(", ")
                _emit(v, out, None, 0)
            out.append("]")
        else:
            pad = "\n" + " " * (indent * (level + 1))
            out.append("[")
            for i, v in enumerate(obj):
                out.append(("," if i else "") + pad)
                _emit(v, out, indent, level + 1)
            out.append("\n" + " " * (indent * level) + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _decode_number(x, what):
    if isinstance(x, str):
        if x in _SPECIAL:
            return _SPECIAL[x]
        raise ProblemFileError(f"{what}: expected a number, got {x!r}")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ProblemFileError(f"{what}: expected a number, got {x!r}")
    return float(x)


def _decode_values(x, what):
    if isinstance(x, list):
        return np.array([_decode_values(v, what) if isinstance(v, list) else _decode_number(v, what)
                         for v in x], dtype=float)
    return _decode_number(x, what)


def _encode_sparse(A: SparseMatrix) -> dict:
    trip = [[int(i), int(j), float(v)] for i, j, v in zip(A.rows, A.cols, A.vals)]
    return {"type": "sparse", "shape": [A.m, A.n], "triplets": trip}


def _decode_sparse(obj, what) -> SparseMatrix:
    try:
        m, n = (int(s) for s in obj["shape"])
        trip = obj["triplets"]
        if trip:
            rows = [int(t[0]) for t in trip]
            cols = [int(t[1]) for t in trip]
            vals = [_decode_number(t[2], what) for t in trip]
        else:
            rows, cols, vals = [], [], []
        return SparseMatrix((m, n), rows, cols, vals)
    except ProblemFileError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ProblemFileError(f"{what}: bad sparse matrix ({exc})") from exc


def _encode_param(val):
    if isinstance(val, SparseMatrix):
        return _encode_sparse(val)
    if isinstance(val, np.ndarray):
        if val.ndim == 2:
            return {"type": "dense", "shape": list(val.shape), "data": val.ravel().tolist()}
        if np.issubdtype(val.dtype, np.integer):
            return [int(v) for v in val]
        return [float(v) for v in val]
    if isinstance(val, (np.integer, int)) and not isinstance(val, bool):
        return int(val)
    return float(val)


def _decode_param(val, what):
    if isinstance(val, dict):
        kind = val.get("type")
        if kind == "sparse":
            return _decode_sparse(val, what)
        if kind == "dense":
            try:
                shape = tuple(int(s) for s in val["shape"])
                data = _decode_values(val["data"], what) if val["data"] else np.zeros(0)
                return np.asarray(data, dtype=float).reshape(shape)
            except (KeyError, TypeError, ValueError) as exc:
                raise ProblemFileError(f"{what}: bad dense matrix ({exc})") from exc
        raise ProblemFileError(f"{what}: unknown matrix type {kind!r}")
    if isinstance(val, list):
        return _decode_values(val, what)
    if isinstance(val, int) and not isinstance(val, bool):
        return val
    return _decode_number(val, what)


def problem_to_dict(problem: BlockProblem, metadata: dict | None = None) -> dict:
    """Encode a problem; custom or scaled operators cannot be written."""
    blocks = []
    for i, op in enumerate(problem.prox_ops):
        if isinstance(op, ScaledProx) or op.kind not in KINDS:
            raise ValueError(f"block {i}: operator of kind {op.kind!r} cannot be written to a file")
        params = {k: _encode_param(v) for k, v in op.params().items()}
        blocks.append({"kind": op.kind, "size": op.size, "params": params})
    out: dict = {"format": "a2dr-problem", "version": FORMAT_VERSION, "blocks": blocks}
    if problem.m > 0:
        A = problem.A
        out["A"] = {"m": A.m, "n": A.n,
                    "triplets": [[int(i), int(j), float(v)] for i, j, v in zip(A.rows, A.cols, A.vals)]}
        out["b"] = [float(v) for v in problem.b]
    if metadata:
        out["metadata"] = metadata
    return out


def problem_from_dict(obj: dict) -> BlockProblem:
    """Decode a problem file; raises :class:`ProblemFileError` on any defect."""
    if not isinstance(obj, dict):
        raise ProblemFileError("problem file must be a JSON object")
    if obj.get("format", "a2dr-problem") != "a2dr-problem":
        raise ProblemFileError(f"not a problem file (format {obj.get('format')!r})")
    if obj.get("version") != FORMAT_VERSION:
        raise ProblemFileError(f"unsupported version {obj.get('version')!r}")
    blocks = obj.get("blocks")
    if not isinstance(blocks, list) or not blocks:
        raise ProblemFileError("'blocks' must be a nonempty list")
    ops: list[ProxOperator] = []
    for i, blk in enumerate(blocks):
        what = f"block {i}"
        if not isinstance(blk, dict) or "kind" not in blk:
            raise ProblemFileError(f"{what}: needs a 'kind'")
        kind = blk["kind"]
        if kind not in KINDS:
            raise ProblemFileError(f"{what}: unknown prox kind {kind!r}")
        size = blk.get("size")
        if size is not None and (isinstance(size, bool) or not isinstance(size, int) or size <= 0):
            raise ProblemFileError(f"{what}: size must be a positive integer")
        raw = blk.get("params", {})
        if not isinstance(raw, dict):
            raise ProblemFileError(f"{what}: 'params' must be an object")
        params = {k: _decode_param(v, f"{what}.{k}") for k, v in raw.items()}
        try:
            ops.append(make_prox(kind, size, **params))
        except (TypeError, ValueError) as exc:
            raise ProblemFileError(f"{what}: {exc}") from exc
    has_A, has_b = "A" in obj, "b" in obj
    if has_A != has_b:
        raise ProblemFileError("'A' and 'b' must be given together")
    try:
        if not has_A:
            return BlockProblem(ops)
        Aobj = obj["A"]
        if not isinstance(Aobj, dict):
            raise ProblemFileError("'A' must be an object")
        A = _decode_sparse({"shape": [Aobj.get("m"), Aobj.get("n")],
                            "triplets": Aobj.get("triplets", [])}, "A")
        b = obj["b"]
        if not isinstance(b, list):
            raise ProblemFileError("'b' must be a list")
        b = _decode_values(b, "b") if b else np.zeros(0)
        return BlockProblem(ops, A, b)
    except ProblemFileError:
        raise
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(str(exc)) from exc


def write_problem(path, problem: BlockProblem, metadata: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(problem_to_dict(problem, metadata)))


def read_problem(path) -> BlockProblem:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"invalid JSON: {exc}") from exc
    return problem_from_dict(obj)


def result_to_dict(result, opts=None) -> dict:
    """Encode a :class:`~a2dr.solver.SolverResult` for the result file."""
    pathology = None
    if result.pathology is not None:
        pathology = {"status": result.pathology.status.value,
                     "estimate": float(result.pathology.estimate),
                     "iteration": int(result.pathology.iteration)}
    out = {
        "format": "a2dr-result",
        "version": FORMAT_VERSION,
        "status": result.status.value,
        "num_iters": int(result.num_iters),
        "solve_time": float(result.solve_time),
        "objective": float(result.objective),
        "x": [[float(v) for v in xb] for xb in result.x_blocks],
        "lam": [float(v) for v in result.lam],
        "primal_residuals": [float(v) for v in result.primal_norms],
        "dual_residuals": [float(v) for v in result.dual_norms],
        "delta_v_norm": float(np.linalg.norm(result.delta_v)),
        "pathology": pathology,
        "options": None if opts is None else opts.as_dict(),
    }
    return out


def problems_equal(p: BlockProblem, q: BlockProblem) -> bool:
    """Structural equality: kinds, sizes, parameters, ``A`` and ``b``."""
    if p.sizes != q.sizes or p.m != q.m or not np.array_equal(p.b, q.b) or p.A != q.A:
        return False
    for a, b in zip(p.prox_ops, q.prox_ops):
        if a.kind != b.kind:
            return False
        pa, pb = a.params(), b.params()
        if pa.keys() != pb.keys():
            return False
        for k in pa:
            x, y = pa[k], pb[k]
            if isinstance(x, SparseMatrix) or isinstance(y, SparseMatrix):
                if not (isinstance(x, SparseMatrix) and isinstance(y, SparseMatrix) and x == y):
                    return False
            elif not np.array_equal(np.asarray(x, dtype=float), np.asarray(y, dtype=float)):
                return False
    return True
