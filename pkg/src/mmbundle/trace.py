"""Newline-delimited trace files.

One JSON object per line, keys in a fixed order, floats written with 17
significant digits so a trace round-trips bit for bit. Line kinds:

``header``
    ``format, problem, operator, x0, known_solution, seed, config, sampler``
``outer``
    one per stopping test: ``k, x, u, u_norm, bundle_size``
``step``
    one per inner iteration: the :class:`IterationRecord` fields in order
``result``
    ``status, x_final, n_serious, n_oracle_calls, bundle_size_final,
    tol_stop, certificate``
``ppa``
    one per proximal-point iterate: ``t, x``

Every line except the header ends with ``wall_ns`` (nanoseconds since the
run started); :func:`strip_timing` removes it for byte comparisons.
"""

import json
import math
import re
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ContractViolation
from .oracle import SAMPLER_ALGORITHM
from .solver import IterationRecord

FORMAT = "mmbundle-trace/1"
_TIMING = re.compile(r',"wall_ns":\d+\}$')


def _encode(value):
    if isinstance(value, (bool, np.bool_)) or value is None:
        return json.dumps(None if value is None else bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, np.ndarray):
        return _encode(value.tolist())
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_encode(v)}" for k, v in value.items()) + "}"
    if hasattr(value, "value"):
        return _encode(value.value)
    raise ContractViolation(f"cannot serialize {type(value).__name__} in a trace")


def dumps_line(obj):
    """Serialize one record; keys keep insertion order."""
    return _encode(obj)


def strip_timing(line):
    return _TIMING.sub("}", line.rstrip("\n"))


class TraceWriter:
    """Write a trace incrementally; usable as the ``on_record`` callback of ``solve``."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self._t0 = time.perf_counter_ns()

    def _write(self, obj, timed=True):
        if timed:
            obj["wall_ns"] = time.perf_counter_ns() - self._t0
        self._fh.write(dumps_line(obj) + "\n")

    def header(self, problem, config):
        self._write(
            {
                "kind": "header",
                "format": FORMAT,
                "problem": problem.name,
                "operator": problem.spec.to_dict(),
                "x0": problem.x0,
                "known_solution": problem.known_solution,
                "seed": problem.seed,
                "config": config.to_dict() if config is not None else None,
                "sampler": SAMPLER_ALGORITHM,
            },
            timed=False,
        )

    def __call__(self, kind, payload):
        if kind == "outer":
            self._write({"kind": "outer", **payload})
        else:
            self._write({"kind": "step", **payload.to_dict()})

    def result(self, report):
        cert = report.certificate
        self._write(
            {
                "kind": "result",
                "status": report.status.value,
                "x_final": report.x_final,
                "n_serious": report.n_serious,
                "n_oracle_calls": report.n_oracle_calls,
                "bundle_size_final": report.bundle_size_final,
                "tol_stop": report.tol_stop,
                "certificate": None
                if cert is None
                else {"xhat": cert.xhat, "uhat": cert.uhat, "epshat": cert.epshat},
            }
        )

    def ppa(self, path):
        for t, x in enumerate(path):
            self._write({"kind": "ppa", "t": t, "x": x})

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class Trace:
    header: dict
    outer: list = field(default_factory=list)
    records: list = field(default_factory=list)
    result: Optional[dict] = None
    ppa: list = field(default_factory=list)


def read_trace(path):
    """Parse a trace file back into header, outer infos, records and result."""
    trace = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ContractViolation(f"{path}:{lineno}: {exc.msg}") from exc
            kind = obj.pop("kind", None)
            obj.pop("wall_ns", None)
            if kind == "header":
                if obj.get("format") != FORMAT:
                    raise ContractViolation(f"{path}:{lineno}: unsupported trace format {obj.get('format')!r}")
                trace = Trace(header=obj)
                continue
            if trace is None:
                raise ContractViolation(f"{path}:{lineno}: record before header")
            if kind == "outer":
                obj["x"] = np.asarray(obj["x"], dtype=float)
                obj["u"] = np.asarray(obj["u"], dtype=float)
                trace.outer.append(obj)
            elif kind == "step":
                trace.records.append(IterationRecord.from_dict(obj))
            elif kind == "result":
                trace.result = obj
            elif kind == "ppa":
                trace.ppa.append(np.asarray(obj["x"], dtype=float))
            else:
                raise ContractViolation(f"{path}:{lineno}: unknown record kind {kind!r}")
    if trace is None:
        raise ContractViolation(f"{path}: empty trace")
    return trace


def timing_free_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [strip_timing(line) for line in fh]
