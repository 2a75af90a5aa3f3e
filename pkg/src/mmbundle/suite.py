"""Run problem suites: traces, audited run artifacts and a summary table."""

import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .audit import AuditEntry, RunArtifact, RunData, audit_run
from .baseline import run_ppa
from .exceptions import ContractViolation
from .oracle import eval_oracle
from .problems import load_suite
from .solver import SolverConfig, Status, solve
from .trace import TraceWriter

GOOD_STATUSES = (Status.CONVERGED, Status.EXACT_ZERO, Status.CERTIFICATE)
SUMMARY_COLUMNS = ("problem", "method", "status", "serious_steps", "oracle_calls", "final_error", "all_pass")


def final_error(problem, x):
    """Distance to the known solution, else the residual ``|T(x)|``."""
    if problem.known_solution is not None:
        return float(np.linalg.norm(x - problem.known_solution))
    return float(np.linalg.norm(eval_oracle(problem.spec, x)))


def run_bundle(problem, solver_options=None, lambda_rule="best_vertex", trace_path=None):
    """Solve, optionally writing a trace, and audit the run."""
    options = dict(solver_options or {})
    options["lambda_rule"] = lambda_rule
    config = SolverConfig(x0=problem.x0, **options)
    writer = TraceWriter(trace_path) if trace_path else None
    t0 = time.perf_counter()
    try:
        if writer:
            writer.header(problem, config)
        report = solve(problem.spec, config, on_record=writer)
        elapsed = time.perf_counter() - t0
        if writer:
            writer.result(report)
    finally:
        if writer:
            writer.close()
    t1 = time.perf_counter()
    audit = audit_run(RunData.from_report(problem, config, report))
    timing = {"solve_s": elapsed, "audit_s": time.perf_counter() - t1}
    extra = {"final_error": final_error(problem, report.x_final)}
    return RunArtifact(problem.name, f"bundle/{lambda_rule}", report, audit, timing, extra)


def run_baseline(problem, c=1.0, iters=500, trace_path=None, reference=None, tol_stop=None):
    """Proximal-point run; audited for agreement with ``reference`` bundle points."""
    t0 = time.perf_counter()
    path = run_ppa(problem.spec, problem.x0, c, iters)
    elapsed = time.perf_counter() - t0
    if trace_path:
        with TraceWriter(trace_path) as writer:
            writer.header(problem, None)
            writer.ppa(path)
    limit = path[-1]
    audit = []
    if reference:
        tol = 10.0 * max(tol_stop or 0.0, 1e-6)
        gaps = [float(np.linalg.norm(x - limit)) for x in reference]
        worst = tol - max(gaps)
        audit.append(AuditEntry("baseline_agreement", worst >= 0, worst, len(gaps)))
    extra = {"final_error": final_error(problem, limit), "iterations": int(iters), "c": float(c)}
    return RunArtifact(problem.name, "ppa", None, audit, {"solve_s": elapsed}, extra), limit


def _bundle_task(args):
    problem, options, rule, trace_path = args
    return run_bundle(problem, options, rule, trace_path)


def _summary_row(artifact):
    report = artifact.report
    return {
        "problem": artifact.problem,
        "method": artifact.method,
        "status": report.status.value if report is not None else "-",
        "serious_steps": report.n_serious if report is not None else artifact.extra.get("iterations", 0),
        "oracle_calls": report.n_oracle_calls if report is not None else artifact.extra.get("iterations", 0),
        "final_error": artifact.extra.get("final_error"),
        "all_pass": artifact.passed,
    }


def _cell(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.3e}"
    return "-" if value is None else str(value)


def format_table(rows):
    """Aligned plain-text table of summary rows."""
    cells = [list(SUMMARY_COLUMNS)] + [[_cell(row[c]) for c in SUMMARY_COLUMNS] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(SUMMARY_COLUMNS))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in cells) + "\n"


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(type(value).__name__)


def _finite(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def execute_suite(suite, out_dir):
    """Run every problem and variant of a parsed suite; returns the artifacts in order."""
    os.makedirs(out_dir, exist_ok=True)
    tasks = [
        (problem, suite.solver, rule, os.path.join(out_dir, f"{problem.name}__bundle_{rule}.ndjson"))
        for problem in suite.problems
        for rule in suite.lambda_rules
    ]
    if suite.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=suite.workers) as pool:
            bundle_runs = list(pool.map(_bundle_task, tasks))
    else:
        bundle_runs = [_bundle_task(task) for task in tasks]

    artifacts = []
    per_problem = len(suite.lambda_rules)
    for i, problem in enumerate(suite.problems):
        runs = bundle_runs[i * per_problem : (i + 1) * per_problem]
        artifacts.extend(runs)
        if suite.baseline is None or problem.spec.resolvent(problem.x0, 1.0) is None:
            continue
        ppa, _ = run_baseline(
            problem,
            suite.baseline["c"],
            suite.baseline["iters"],
            os.path.join(out_dir, f"{problem.name}__ppa.ndjson"),
            reference=[r.report.x_final for r in runs],
            tol_stop=max((r.report.tol_stop for r in runs), default=0.0),
        )
        artifacts.append(ppa)

    for artifact in artifacts:
        stem = artifact.method.replace("/", "_")
        _write_json(os.path.join(out_dir, f"{artifact.problem}__{stem}.json"), _finite(artifact.to_dict()))
    rows = [_summary_row(a) for a in artifacts]
    _write_json(os.path.join(out_dir, "summary.json"), _finite(rows))
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_table(rows))
    return artifacts


def run_suite(suite_config_path, output_dir):
    """Exit code 0 when every run ends well and every audit passes, 1 on audit or run failure, 2 on bad config."""
    try:
        suite = load_suite(suite_config_path)
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        artifacts = execute_suite(suite, output_dir)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    with open(os.path.join(output_dir, "summary.txt"), encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    for artifact in artifacts:
        failing = artifact.first_failure()
        if failing is not None:
            print(
                f"audit failure: {artifact.problem} {artifact.method}: {failing.name} "
                f"(worst margin {failing.worst_margin:.3e}, first at {failing.first_failure})",
                file=sys.stderr,
            )
            return 1
        if artifact.report is not None and artifact.report.status not in GOOD_STATUSES:
            print(f"run failure: {artifact.problem} {artifact.method} ended {artifact.report.status.value}", file=sys.stderr)
            return 1
    return 0
