"""A-posteriori invariant audit of a bundle run.

Works on plain run data (outer stopping tests plus iteration records), so
the same checks apply to an in-memory :class:`SolveReport` and to a trace
read back from disk. Each check reports its worst margin: the distance to
violation, positive when the check passes.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .oracle import sample_graph
from .solver import StepKind
from .transport import enlargement_residuals

SLACK = 1e-9
SEPARATION_SLACK = 1e-12
IDENTITY_TOL = 1e-12
CERT_SAMPLE = 1000

INVARIANTS = (
    "sigma_radius",
    "y_ball",
    "proximal_identity",
    "serious_vs",
    "serious_sxi",
    "error_bound",
    "separation",
    "step_length_floor",
    "fejer",
    "eps_bound",
    "eps_hat_bound",
    "null_inclusion",
    "direction_certificate",
    "boundedness",
    "j_trend",
)


@dataclass
class AuditEntry:
    name: str
    passed: bool
    worst_margin: Optional[float]
    checked: int = 0
    first_failure: Optional[tuple] = None

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "checked": self.checked,
            "first_failure": None if self.first_failure is None else list(self.first_failure),
        }


class _Tally:
    def __init__(self, name, strict=False):
        self.name = name
        self.strict = strict
        self.worst = None
        self.count = 0
        self.first = None

    def add(self, margin, where):
        margin = float(margin)
        self.count += 1
        if self.worst is None or margin < self.worst or np.isnan(margin):
            self.worst = margin
        ok = margin > 0 if self.strict else margin >= 0
        if not ok and self.first is None:
            self.first = where

    def entry(self):
        return AuditEntry(self.name, self.first is None, self.worst, self.count, self.first)


@dataclass
class RunData:
    """What the audit needs to know about one run."""

    spec: object
    tau: float
    radius: float
    x0: np.ndarray
    outer: list
    records: list
    known_solution: Optional[np.ndarray] = None
    seed: int = 0

    @classmethod
    def from_report(cls, problem, config, report):
        return cls(
            spec=problem.spec,
            tau=config.tau,
            radius=config.radius,
            x0=config.x0,
            outer=report.outer,
            records=report.records,
            known_solution=problem.known_solution,
            seed=problem.seed,
        )

    @classmethod
    def from_trace(cls, trace):
        from .oracle import spec_from_dict

        head = trace.header
        xs = head.get("known_solution")
        return cls(
            spec=spec_from_dict(head["operator"]),
            tau=float(head["config"]["tau"]),
            radius=float(head["config"]["radius"]),
            x0=np.asarray(head["x0"], dtype=float),
            outer=trace.outer,
            records=trace.records,
            known_solution=None if xs is None else np.asarray(xs, dtype=float),
            seed=int(head.get("seed", 0)),
        )


def _record_checks(run, t):
    tau, big_r = run.tau, run.radius
    xs = run.known_solution
    for idx, rec in enumerate(run.records):
        where = (rec.k, rec.n_k)
        rad_l = big_r * 2.0 ** -rec.l_k
        rad_j = big_r * 2.0 ** -rec.j_k
        dx = rec.y - rec.x
        ns = float(np.linalg.norm(rec.s))
        t["sigma_radius"].add(SLACK * max(1.0, rad_l) - abs(rec.sigma * ns - rad_l), where)
        t["y_ball"].add(rad_l + SLACK - np.linalg.norm(dx), where)
        resid = np.linalg.norm(rec.c * rec.v + dx - rec.e)
        t["proximal_identity"].add(IDENTITY_TOL * max(1.0, np.linalg.norm(dx)) - resid, where)
        t["eps_bound"].add(2.0 * rad_l * rec.mu + SLACK - rec.eps, where)
        t["eps_hat_bound"].add(2.0 * rad_j * rec.mu_hat + SLACK - rec.eps_hat, where)
        if rec.step_kind is not StepKind.SERIOUS:
            continue
        half = 0.5 * float(rec.s @ rec.s)
        t["serious_vs"].add(float(rec.v @ rec.s) - half + SLACK, where)
        t["serious_sxi"].add(float(rec.s @ rec.xi) - half + SLACK, where)
        rhs = rec.c**2 * float(rec.v @ rec.v) + float(dx @ dx)
        t["error_bound"].add(rhs + SLACK - float(rec.e @ rec.e), where)
        sep = tau * big_r * 2.0 ** (-rec.l_k - rec.j_k - 1)
        t["separation"].add(float(-dx @ rec.xi) - (sep - SEPARATION_SLACK), where)
        step = rec.x_next - rec.x
        floor = tau * big_r * 2.0 ** (-2 * (rec.j_k + 1))
        t["step_length_floor"].add(np.linalg.norm(step) * np.linalg.norm(rec.xi) - (floor - SLACK), where)
        if xs is not None:
            before = float((rec.x - xs) @ (rec.x - xs))
            after = float((rec.x_next - xs) @ (rec.x_next - xs))
            t["fejer"].add(before - float(step @ step) - after + SLACK, where)


def _null_inclusion(run, tally):
    """Rebuild the raw bundle from the run and check ``I(y) ⊂ Î(x)`` at null steps."""
    by_k = {}
    for rec in run.records:
        by_k.setdefault(rec.k, []).append(rec)
    zs, ids = [], []
    next_id = 1
    for info in run.outer:
        zs.append(np.asarray(info["x"], dtype=float))
        ids.append(next_id)
        next_id += 1
        for rec in by_k.get(info["k"], []):
            if rec.step_kind is not StepKind.NULL:
                continue
            where = (rec.k, rec.n_k)
            if rec.l_k != rec.j_k + 1:
                tally.add(-1.0, where)
                continue
            z = np.array(zs)
            rad_l = run.radius * 2.0 ** -rec.l_k
            rad_j = run.radius * 2.0 ** -rec.j_k
            near_y = np.linalg.norm(z - rec.y, axis=1) <= rad_l + 1e-12
            dist_x = np.linalg.norm(z[near_y] - rec.x, axis=1)
            tally.add(rad_j + SLACK - dist_x.max() if dist_x.size else rad_j, where)
            zs.append(rec.y)
            ids.append(next_id)
            next_id += 1
            if rec.dropped:
                gone = set(rec.dropped)
                keep = [i for i, label in enumerate(ids) if label not in gone]
                zs = [zs[i] for i in keep]
                ids = [ids[i] for i in keep]


def _direction_certificate(run, tally):
    """Each ``(xhat, s, eps_hat)`` against graph samples in ``B(xhat, R 2^-j)``."""
    cache = {}
    for idx, rec in enumerate(run.records):
        key = (rec.xhat.tobytes(), rec.s.tobytes(), rec.eps_hat, rec.j_k)
        if key not in cache:
            sample = sample_graph(
                run.spec, rec.xhat, run.radius * 2.0 ** -rec.j_k, CERT_SAMPLE, seed=run.seed * 100_003 + idx
            )
            cache = {key: enlargement_residuals(rec.xhat, rec.s, [rec.eps_hat], sample)[0]}
        tally.add(cache[key] + SLACK, (rec.k, rec.n_k))


def _boundedness(run, tally):
    xs = run.known_solution
    xk = np.array([info["x"] for info in run.outer])
    if xs is not None:
        center = xs
        rho = float(np.linalg.norm(run.x0 - xs)) + run.radius
    else:
        center = run.x0
        rho = float(np.linalg.norm(xk - run.x0, axis=1).max()) + run.radius
    point_bound = float(np.linalg.norm(center)) + rho
    image_bound = run.spec.local_bound(center, rho)
    points = [xk] + ([np.array([r.y for r in run.records])] if run.records else [])
    images = [np.array([info["u"] for info in run.outer])]
    if run.records:
        images += [np.array([r.xi for r in run.records]), np.array([r.v for r in run.records])]
    max_point = max(float(np.linalg.norm(p, axis=1).max()) for p in points)
    max_image = max(float(np.linalg.norm(p, axis=1).max()) for p in images)
    scale = 1.0 + SLACK
    tally.add(min(point_bound * scale + SLACK - max_point, image_bound * scale + SLACK - max_image), None)


def _j_trend(run, tally):
    js = [r.j_k for r in run.records if r.step_kind is StepKind.SERIOUS]
    if len(js) < 4:
        return
    half = len(js) // 2
    tally.add(max(js[half:]) - max(js[:half]), None)


def audit_run(run):
    """Return one :class:`AuditEntry` per name in :data:`INVARIANTS`, in that order."""
    strict = {"separation", "step_length_floor"}
    t = {name: _Tally(name, strict=name in strict) for name in INVARIANTS}
    _record_checks(run, t)
    _null_inclusion(run, t["null_inclusion"])
    _direction_certificate(run, t["direction_certificate"])
    if run.outer:
        _boundedness(run, t["boundedness"])
    _j_trend(run, t["j_trend"])
    return [t[name].entry() for name in INVARIANTS]


@dataclass
class RunArtifact:
    """A finished run with its audit and wall-clock summary."""

    problem: str
    method: str
    report: object
    audit: list
    timing: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(entry.passed for entry in self.audit)

    def first_failure(self):
        return next((entry for entry in self.audit if not entry.passed), None)

    def to_dict(self):
        report = self.report
        out = {"problem": self.problem, "method": self.method}
        if report is not None:
            out["report"] = {
                "status": report.status.value,
                "x_final": report.x_final.tolist(),
                "n_serious": report.n_serious,
                "n_records": len(report.records),
                "n_oracle_calls": report.n_oracle_calls,
                "bundle_size_final": report.bundle_size_final,
                "tol_stop": report.tol_stop,
            }
        out["audit"] = [entry.to_dict() for entry in self.audit]
        out["passed"] = self.passed
        out["timing"] = dict(self.timing)
        out.update(self.extra)
        return out
