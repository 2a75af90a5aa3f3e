import json
import math

import numpy as np
import pytest

from mmbundle import Affine, ContractViolation, NotMonotoneError
from mmbundle import suite as suite_mod
from mmbundle.audit import INVARIANTS, AuditEntry, RunData, audit_run
from mmbundle.cli import main
from mmbundle.problems import (
    ConfigError,
    ProblemInstance,
    load_suite,
    parse_suite,
    problem_from_dict,
    skew_affine,
)
from mmbundle.suite import execute_suite, format_table, run_bundle, run_suite
from mmbundle.trace import dumps_line, read_trace, strip_timing, timing_free_lines

SMALL_SUITE = """
solver: {tau: 1e-3, radius: 1.0, max_serious: 2000}
lambda_rules: [best_vertex, uniform]
baseline: {c: 1.0, iters: 200}
problems:
  - {library: skew_affine}
  - name: shifted
    operator: {kind: affine, matrix: [[2.0, 1.0], [-1.0, 1.0]], offset: [1.0, -1.0]}
    x0: [2.0, 2.0]
    known_solution: [-0.6666666666666666, 0.33333333333333337]
  - name: pieces
    operator: {kind: max_affine, pieces: [[[1.0, 0.0], 0.0], [[-1.0, 0.0], 0.0], [[0.0, 1.0], 0.0], [[0.0, -1.0], 0.0]]}
    x0: [0.7, -0.4]
"""


@pytest.fixture
def small_suite(tmp_path):
    path = tmp_path / "suite.yaml"
    path.write_text(SMALL_SUITE)
    return path


def test_float_format_and_timing_strip():
    line = dumps_line({"a": 0.1, "b": [1.0, float("nan")], "c": "x", "wall_ns": 123})
    assert line == '{"a":0.10000000000000001,"b":[1,null],"c":"x","wall_ns":123}'
    assert strip_timing(line) == '{"a":0.10000000000000001,"b":[1,null],"c":"x"}'
    assert float(json.loads(line)["a"]) == 0.1


def test_trace_roundtrip_audit_identical(tmp_path):
    problem = skew_affine()
    out = tmp_path / "t.ndjson"
    art = run_bundle(problem, {"max_serious": 500}, "best_vertex", str(out))
    trace = read_trace(out)
    assert trace.result["status"] == art.report.status.value
    assert len(trace.records) == len(art.report.records)
    for a, b in zip(trace.records, art.report.records):
        assert np.array_equal(a.x, b.x) and np.array_equal(a.xi, b.xi) and a.eps == b.eps
    assert [e.to_dict() for e in audit_run(RunData.from_trace(trace))] == [e.to_dict() for e in art.audit]
    lines = out.read_text().splitlines()
    assert all(line.endswith("}") and '"wall_ns":' in line for line in lines[1:])
    assert all(list(json.loads(line))[-1] == "wall_ns" for line in lines[1:])


def test_every_invariant_once():
    art = run_bundle(skew_affine(), {"max_serious": 500})
    assert [e.name for e in art.audit] == list(INVARIANTS)
    assert art.passed


def test_empty_suite(tmp_path):
    cfg = tmp_path / "empty.yaml"
    cfg.write_text("problems: []\n")
    assert run_suite(str(cfg), str(tmp_path / "out")) == 0
    assert json.loads((tmp_path / "out" / "summary.json").read_text()) == []


def test_non_monotone_suite(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("problems:\n  - {name: neg, operator: {kind: affine, matrix: [[-1.0, 0.0], [0.0, -1.0]]}, x0: [1.0, 1.0]}\n")
    assert run_suite(str(cfg), str(tmp_path / "out")) == 2
    assert "problems[0].operator" in capsys.readouterr().err


def test_parse_error_location(tmp_path, capsys):
    cfg = tmp_path / "broken.yaml"
    cfg.write_text("problems: [\n  {library: skew_affine\n")
    assert run_suite(str(cfg), str(tmp_path / "out")) == 2
    assert "broken.yaml:" in capsys.readouterr().err
    with pytest.raises(ConfigError, match=r"solver\.tau"):
        parse_suite({"solver": {"tau": "fast"}})
    with pytest.raises(ConfigError, match="problems\\[0\\]"):
        parse_suite({"problems": [{"name": "x"}]})
    with pytest.raises(ConfigError):
        parse_suite({"problems": [{"library": "nope"}]})


def test_audit_failure_exit_code(small_suite, tmp_path, monkeypatch, capsys):
    real = suite_mod.audit_run

    def broken(run):
        entries = real(run)
        entries[3] = AuditEntry(entries[3].name, False, -1.0, 1, (0, 0))
        return entries

    monkeypatch.setattr(suite_mod, "audit_run", broken)
    assert run_suite(str(small_suite), str(tmp_path / "out")) == 1
    assert "serious_vs" in capsys.readouterr().err


def test_yaml_numbers_and_library():
    s = parse_suite({"solver": {"tau": "1e-3", "max_serious": 1e3}, "problems": [{"library": "diag_affine", "seed": 2}]})
    assert s.solver == {"tau": 1e-3, "max_serious": 1000}
    assert s.problems[0].seed == 2
    with pytest.raises(ConfigError):
        parse_suite({"solver": {"max_serious": 2.5}})


def test_problem_validation():
    with pytest.raises(ContractViolation):
        ProblemInstance("wrong", Affine(np.eye(2), np.zeros(2)), np.ones(2), known_solution=np.ones(2))
    with pytest.raises(NotMonotoneError):
        problem_from_dict({"name": "n", "operator": {"kind": "affine", "matrix": [[-1.0]]}, "x0": [0.0]})
    # set-valued zero certified through the resolvent
    p = problem_from_dict({"name": "l1", "operator": {"kind": "scaled_l1", "weights": [1.0]}, "x0": [1.0], "known_solution": [0.0]})
    assert p.known_solution.tolist() == [0.0]


def test_suite_outputs_and_determinism(small_suite, tmp_path):
    suite = load_suite(small_suite)
    arts = execute_suite(suite, str(tmp_path / "a"))
    assert all(a.passed for a in arts)
    methods = [(a.problem, a.method) for a in arts]
    assert ("skew_affine", "ppa") in methods and ("pieces", "ppa") not in methods
    txt = (tmp_path / "a" / "summary.txt").read_text().splitlines()
    assert txt[0].split() == ["problem", "method", "status", "serious_steps", "oracle_calls", "final_error", "all_pass"]
    assert len(txt) == 1 + len(arts)
    art = json.loads((tmp_path / "a" / "shifted__bundle_best_vertex.json").read_text())
    assert [e["name"] for e in art["audit"]] == list(INVARIANTS)

    parallel = parse_suite({**_yaml(small_suite), "workers": 2})
    execute_suite(parallel, str(tmp_path / "b"))
    for name in sorted(p.name for p in (tmp_path / "a").glob("*.ndjson")):
        assert timing_free_lines(tmp_path / "a" / name) == timing_free_lines(tmp_path / "b" / name)


def _yaml(path):
    import yaml

    return yaml.safe_load(path.read_text())


def test_format_table_alignment():
    rows = [
        {"problem": "p", "method": "m", "status": "converged", "serious_steps": 3, "oracle_calls": 10, "final_error": 1.5e-9, "all_pass": True},
        {"problem": "longer", "method": "ppa", "status": "-", "serious_steps": 500, "oracle_calls": 500, "final_error": None, "all_pass": False},
    ]
    lines = format_table(rows).splitlines()
    assert lines[1].index("m ") == lines[2].index("ppa")
    assert "1.500e-09" in lines[1] and "true" in lines[1] and "false" in lines[2]


def test_cli(tmp_path, capsys):
    trace = tmp_path / "skew.ndjson"
    assert main(["solve", "--problem", "skew_affine", "--trace-out", str(trace)]) == 0
    out = capsys.readouterr().out
    assert "status       converged" in out and "fejer" in out
    assert main(["audit", str(trace)]) == 0
    assert main(["baseline", "--problem", "l1_subdiff", "--iters", "5"]) == 0
    assert "final_error  0.000e+00" in capsys.readouterr().out

    pfile = tmp_path / "maxaff.yaml"
    pfile.write_text("name: m\noperator: {kind: max_affine, pieces: [[[1.0], 0.0], [[-1.0], 0.0]]}\nx0: [1.0]\n")
    assert main(["baseline", "--problem", str(pfile)]) == 2
    assert "no closed-form resolvent" in capsys.readouterr().err
    assert main(["solve", "--problem", str(pfile), "--tol", "1e-6", "--lambda-rule", "uniform"]) == 0

    with pytest.raises(SystemExit):
        main(["solve", "--problem", "skew_affine", "--lambda-rule", "nope"])
    assert main(["solve", "--problem", "no_such_problem"]) == 2


def test_ppa_trace(tmp_path):
    out = tmp_path / "ppa.ndjson"
    assert main(["baseline", "--problem", "skew_affine", "--iters", "3", "--trace-out", str(out)]) == 0
    trace = read_trace(out)
    assert len(trace.ppa) == 4 and trace.header["config"] is None
    assert main(["audit", str(out)]) == 0
    assert all(math.isfinite(v) for x in trace.ppa for v in x)
