"""Command line interface: ``mmbundle solve|baseline|suite|audit``."""

import argparse
import sys

import numpy as np

from .audit import RunData, audit_run
from .baseline import ResolventUnavailable
from .exceptions import ContractViolation, InternalError, NumericalError
from .problems import LIBRARY, resolve_problem
from .suite import final_error, run_baseline, run_bundle, run_suite
from .trace import read_trace


def _audit_lines(entries):
    width = max(len(e.name) for e in entries)
    for e in entries:
        margin = "n/a" if e.worst_margin is None else f"{e.worst_margin:.3e}"
        yield f"{e.name.ljust(width)}  {'PASS' if e.passed else 'FAIL'}  worst_margin={margin}  checked={e.checked}"


def cmd_solve(args):
    problem = resolve_problem(args.problem, args.seed)
    options = {"tau": args.tau, "radius": args.radius, "max_serious": args.max_serious}
    if args.tol is not None:
        options["tol_stop"] = args.tol
    artifact = run_bundle(problem, options, args.lambda_rule, args.trace_out)
    report = artifact.report
    np.set_printoptions(precision=10)
    print(f"problem      {problem.name}")
    print(f"status       {report.status.value}")
    print(f"serious      {report.n_serious}")
    print(f"records      {len(report.records)}")
    print(f"oracle_calls {report.n_oracle_calls}")
    print(f"final_error  {final_error(problem, report.x_final):.3e}")
    print(f"x_final      {report.x_final}")
    print(f"solve_s      {artifact.timing['solve_s']:.3f}")
    for line in _audit_lines(artifact.audit):
        print(line)
    return 0 if artifact.passed else 1


def cmd_baseline(args):
    problem = resolve_problem(args.problem, args.seed)
    artifact, limit = run_baseline(problem, args.c, args.iters, args.trace_out)
    print(f"problem      {problem.name}")
    print(f"iterations   {args.iters}")
    print(f"final_error  {artifact.extra['final_error']:.3e}")
    print(f"x_final      {limit}")
    return 0


def cmd_suite(args):
    return run_suite(args.config, args.out)


def cmd_audit(args):
    trace = read_trace(args.trace)
    if not trace.records and not trace.outer:
        print("trace holds no bundle iterations; nothing to audit")
        return 0
    entries = audit_run(RunData.from_trace(trace))
    for line in _audit_lines(entries):
        print(line)
    return 0 if all(e.passed for e in entries) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="mmbundle", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    problem_help = f"library name ({', '.join(sorted(LIBRARY))}) or a YAML problem file"

    p = sub.add_parser("solve", help="run the bundle method on one problem")
    p.add_argument("--problem", required=True, help=problem_help)
    p.add_argument("--seed", type=int, default=0, help="seed for library problems")
    p.add_argument("--tau", type=float, default=1e-3)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=None, help="stopping tolerance on |u^k|")
    p.add_argument("--max-serious", type=int, default=10_000)
    p.add_argument("--lambda-rule", choices=("best_vertex", "min_norm", "uniform"), default="best_vertex")
    p.add_argument("--trace-out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("baseline", help="exact proximal-point iterations")
    p.add_argument("--problem", required=True, help=problem_help)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--trace-out", default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("suite", help="run a YAML suite and write traces, artifacts and a summary")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("audit", help="re-check the invariants recorded in a trace")
    p.add_argument("trace")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ResolventUnavailable as exc:
        print(f"baseline unavailable: {exc}", file=sys.stderr)
        return 2
    except (InternalError, NumericalError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except (ContractViolation, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
