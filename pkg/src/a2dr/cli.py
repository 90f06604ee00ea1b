"""Command-line front end.

``a2dr solve problem.json``
    Solve a problem file and write the result file (stdout by default).
``a2dr gen FAMILY [key=value ...] [--seed S] [--preset P]``
    Write a generated benchmark instance as a problem file.
``a2dr bench FAMILY [key=value ...]``
    Run plain DRS and A2DR on a generated instance and report the
    iterations each needs to reach ``--tol``.

Exit codes: 0 solved, 2 iteration limit, 3 infeasibility or unboundedness
detected, 1 bad input.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import io
from .bench import FAMILIES, generate
from .drs import ProxError
from .solver import SolverOptions, Status, solve

__all__ = ["main", "run", "build_parser", "exit_code"]

EXIT_SOLVED = 0
EXIT_INPUT = 1
EXIT_MAX_ITER = 2
EXIT_PATHOLOGY = 3


def exit_code(status: Status) -> int:
    if status is Status.SOLVED:
        return EXIT_SOLVED
    if status is Status.MAX_ITERATIONS:
        return EXIT_MAX_ITER
    return EXIT_PATHOLOGY


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver options")
    g.add_argument("--max-iters", type=int, default=1000)
    g.add_argument("--eps-abs", type=float, default=1e-6)
    g.add_argument("--eps-rel", type=float, default=1e-8)
    g.add_argument("--t", type=float, default=None, help="step size (default: from equilibration)")
    g.add_argument("--eta", type=float, default=1e-8, help="Anderson regularization coefficient")
    g.add_argument("--mem", type=int, default=10, help="Anderson memory")
    g.add_argument("--regularization", choices=["adaptive", "constant", "none"], default="adaptive")
    g.add_argument("--safeguard-D", dest="safeguard_D", type=float, default=1e6)
    g.add_argument("--safeguard-eps", type=float, default=1e-6)
    g.add_argument("--safeguard-R", dest="safeguard_R", type=int, default=10)
    g.add_argument("--no-aa", action="store_true", help="plain Douglas-Rachford")
    g.add_argument("--no-precond", action="store_true", help="skip equilibration")
    g.add_argument("--presolve-tol", type=float, default=1e-8)
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="parallel prox evaluations (default: available cores)")


def _options(args) -> SolverOptions:
    opts = SolverOptions(
        t=args.t, eta=args.eta, D=args.safeguard_D, epsilon=args.safeguard_eps,
        R=args.safeguard_R, max_mem=args.mem, eps_abs=args.eps_abs, eps_rel=args.eps_rel,
        max_iter=args.max_iters, enable_aa=not args.no_aa, enable_precond=not args.no_precond,
        regularization=args.regularization, threads=args.threads,
        presolve_tol=args.presolve_tol)
    opts.validate()
    return opts


def _sizes(pairs) -> dict:
    out = {}
    for item in pairs:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ValueError(f"size argument {item!r} is not key=value")
        try:
            out[key] = int(val)
        except ValueError:
            out[key] = float(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="a2dr", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a problem file")
    p.add_argument("problem", help="problem JSON file")
    p.add_argument("--output", "-o", help="result file (default: stdout)")
    _solver_flags(p)

    p = sub.add_parser("gen", help="generate a benchmark problem file")
    p.add_argument("family", choices=sorted(FAMILIES))
    p.add_argument("sizes", nargs="*", help="size overrides as key=value")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", default="desk")
    p.add_argument("--output", "-o", help="problem file (default: stdout)")

    p = sub.add_parser("bench", help="compare DRS and A2DR on a generated instance")
    p.add_argument("family", choices=sorted(FAMILIES))
    p.add_argument("sizes", nargs="*", help="size overrides as key=value")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", default="desk")
    p.add_argument("--tol", type=float, default=1e-4, help="residual tolerance to count iterations to")
    p.add_argument("--output", "-o", help="also write the A2DR result file here")
    _solver_flags(p)
    return parser


def _write(text: str, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(args) -> int:
    problem = io.read_problem(args.problem)
    opts = _options(args)
    result = solve(problem, opts)
    _write(io.dumps(io.result_to_dict(result, opts)), args.output)
    print(f"{result.status.value}: {result.num_iters} iterations, "
          f"objective {result.objective:.10g}, {result.solve_time:.3f} s", file=sys.stderr)
    return exit_code(result.status)


def _cmd_gen(args) -> int:
    inst = generate(args.family, seed=args.seed, preset=args.preset, **_sizes(args.sizes))
    meta = {"family": inst.family, "seed": inst.seed, "preset": args.preset,
            "sizes": dict(inst.sizes), "params": dict(inst.params)}
    _write(io.dumps(io.problem_to_dict(inst.problem, meta)), args.output)
    return EXIT_SOLVED


def _cmd_bench(args) -> int:
    inst = generate(args.family, seed=args.seed, preset=args.preset, **_sizes(args.sizes))
    opts = _options(args)
    counts = {}
    last = None
    for label, aa in (("DRS", False), ("A2DR", True)):
        run_opts = SolverOptions(**{**opts.__dict__, "enable_aa": aa,
                                    "eps_abs": args.tol, "eps_rel": 0.0})
        res = solve(inst.problem, run_opts)
        counts[label] = res.iterations_to(args.tol)
        shown = counts[label] if counts[label] is not None else f">{res.num_iters}"
        print(f"{label:5s} iterations to {args.tol:g}: {shown}  "
              f"({res.status.value}, {res.solve_time:.3f} s)")
        last = (res, run_opts)
    drs, aa = counts["DRS"], counts["A2DR"]
    if drs and aa:
        print(f"ratio A2DR/DRS: {aa / drs:.3f}")
    if args.output and last is not None:
        _write(io.dumps(io.result_to_dict(*last)), args.output)
    return exit_code(last[0].status)


def run(argv=None) -> int:
    """Parse ``argv`` and run the chosen subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SOLVED if exc.code == 0 else EXIT_INPUT
    handlers = {"solve": _cmd_solve, "gen": _cmd_gen, "bench": _cmd_bench}
    try:
        return handlers[args.command](args)
    except (io.ProblemFileError, ValueError, TypeError, OSError, ProxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
