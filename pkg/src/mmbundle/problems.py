"""Problem instances, the built-in library and suite configuration loading."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .exceptions import ContractViolation, NotMonotoneError
from .oracle import Affine, OperatorSpec, ScaledL1Subdiff, eval_oracle, resolvent, spec_from_dict
from .validation import check_vector

SOLUTION_TOL = 1e-8


class ConfigError(ContractViolation):
    """A suite or problem file could not be parsed; ``location`` says where."""

    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """An operator, a starting point and, when known, a zero of the operator."""

    name: str
    spec: OperatorSpec
    x0: np.ndarray
    known_solution: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "x0", check_vector(self.x0, self.spec.dimension, name="x0").copy())
        if self.known_solution is None:
            return
        xs = check_vector(self.known_solution, self.spec.dimension, name="known_solution").copy()
        object.__setattr__(self, "known_solution", xs)
        if np.linalg.norm(eval_oracle(self.spec, xs)) <= SOLUTION_TOL:
            return
        # set-valued operators: a zero is a fixed point of the resolvent
        fixed = resolvent(self.spec, xs, 1.0)
        if fixed is None or np.linalg.norm(fixed - xs) > SOLUTION_TOL:
            raise ContractViolation(f"known_solution of problem {self.name!r} is not a zero of the operator")

    def to_dict(self):
        return {
            "name": self.name,
            "operator": self.spec.to_dict(),
            "x0": self.x0.tolist(),
            "known_solution": None if self.known_solution is None else self.known_solution.tolist(),
            "seed": self.seed,
        }


def diag_affine(seed=0, n=10):
    """``A = diag(1..n)``, ``b`` standard normal from ``seed``, started at ones."""
    a = np.diag(np.arange(1.0, n + 1.0))
    b = np.random.default_rng(seed).standard_normal(n)
    return ProblemInstance(
        name="diag_affine", spec=Affine(a, b), x0=np.ones(n), known_solution=-b / np.diag(a), seed=seed
    )


def skew_affine(seed=0):
    """Rotation generator ``[[0, 1], [-1, 0]]``: monotone, no potential."""
    return ProblemInstance(
        name="skew_affine",
        spec=Affine([[0.0, 1.0], [-1.0, 0.0]], [0.0, 0.0]),
        x0=np.ones(2),
        known_solution=np.zeros(2),
        seed=seed,
    )


def l1_subdiff(seed=0, n=10):
    """Subdifferential of the unit-weight l1 norm, started uniformly in ``[-2, 2]^n``."""
    x0 = np.random.default_rng(seed).uniform(-2.0, 2.0, n)
    return ProblemInstance(
        name="l1_subdiff", spec=ScaledL1Subdiff(np.ones(n)), x0=x0, known_solution=np.zeros(n), seed=seed
    )


LIBRARY = {
    "diag_affine": diag_affine,
    "skew_affine": skew_affine,
    "l1_subdiff": l1_subdiff,
}


def library_problem(name, seed=0):
    try:
        factory = LIBRARY[name]
    except KeyError:
        raise ConfigError(f"unknown library problem {name!r}; known: {', '.join(sorted(LIBRARY))}") from None
    return factory(seed=seed)


def problem_from_dict(data, location="problem"):
    """Build a problem from a mapping.

    Either ``{library: <name>, seed: ...}`` or an explicit
    ``{name, operator, x0, known_solution?, seed?}``.
    """
    if not isinstance(data, dict):
        raise ConfigError("problem entry must be a mapping", location)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}", f"{location}.seed")
    if "library" in data:
        problem = library_problem(data["library"], seed)
        if "name" in data:
            problem = ProblemInstance(str(data["name"]), problem.spec, problem.x0, problem.known_solution, seed)
        return problem
    for key in ("name", "operator", "x0"):
        if key not in data:
            raise ConfigError(f"missing key {key!r}", location)
    try:
        spec = spec_from_dict(data["operator"])
    except NotMonotoneError as exc:
        raise NotMonotoneError(f"{location}.operator: {exc}") from exc
    except ContractViolation as exc:
        raise ConfigError(str(exc), f"{location}.operator") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), f"{location}.operator") from exc
    return ProblemInstance(
        name=str(data["name"]),
        spec=spec,
        x0=data["x0"],
        known_solution=data.get("known_solution"),
        seed=seed,
    )


@dataclass(frozen=True)
class SuiteConfig:
    problems: tuple = ()
    solver: dict = field(default_factory=dict)
    lambda_rules: tuple = ("best_vertex", "min_norm", "uniform")
    baseline: Optional[dict] = None
    workers: int = 1


SOLVER_KEYS = {
    "tau": float,
    "radius": float,
    "tol_stop": float,
    "radius_floor": float,
    "max_serious": int,
    "max_null_per_serious": int,
    "minnorm_tol": float,
    "bundle_cap": int,
}


def _coerce(value, kind, location):
    # yaml reads "1e-3" (no dot) as a string
    if value is None:
        return None
    try:
        number = None if isinstance(value, bool) else float(value)
    except (TypeError, ValueError):
        number = None
    if number is None or not np.isfinite(number) or (kind is int and not number.is_integer()):
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", location)
    return int(number) if kind is int else number


def parse_solver_section(section, location="solver"):
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ConfigError("must be a mapping", location)
    out = {}
    for key, value in section.items():
        if key == "ck_rule":
            out[key] = value if value == "equal_sigma" else _coerce(value, float, f"{location}.{key}")
        elif key in SOLVER_KEYS:
            out[key] = _coerce(value, SOLVER_KEYS[key], f"{location}.{key}")
        else:
            raise ConfigError(f"unknown solver option {key!r}", f"{location}.{key}")
    return out


def load_yaml(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(str(exc), str(path)) from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark is not None else str(path)
        raise ConfigError(getattr(exc, "problem", None) or str(exc), where) from exc


def parse_suite(data, source="suite"):
    """Validate a parsed suite document.

    Layout::

        solver: {tau: 1.0e-3, radius: 1.0, max_serious: 5000}
        lambda_rules: [best_vertex, min_norm, uniform]
        baseline: {c: 1.0, iters: 500}
        workers: 1
        problems:
          - {library: diag_affine, seed: 0}
          - {name: tiny, operator: {kind: affine, matrix: [[2.0]], offset: [1.0]}, x0: [3.0]}
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source)
    unknown = set(data) - {"problems", "solver", "lambda_rules", "baseline", "workers"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", source)
    raw_problems = data.get("problems") or []
    if not isinstance(raw_problems, list):
        raise ConfigError("must be a list", f"{source}:problems")
    problems = tuple(problem_from_dict(p, f"{source}:problems[{i}]") for i, p in enumerate(raw_problems))
    names = [p.name for p in problems]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate problem names in {names}", f"{source}:problems")
    solver = parse_solver_section(data.get("solver"), f"{source}:solver")
    rules = data.get("lambda_rules", SuiteConfig.lambda_rules)
    if isinstance(rules, str):
        rules = [rules]
    valid = {"best_vertex", "min_norm", "uniform"}
    if not isinstance(rules, (list, tuple)) or not set(rules) <= valid:
        raise ConfigError(f"lambda_rules must be a subset of {sorted(valid)}", f"{source}:lambda_rules")
    baseline = data.get("baseline", {"c": 1.0, "iters": 500})
    if baseline is not None:
        if not isinstance(baseline, dict) or set(baseline) - {"c", "iters"}:
            raise ConfigError("baseline takes keys c and iters", f"{source}:baseline")
        baseline = {
            "c": _coerce(baseline.get("c", 1.0), float, f"{source}:baseline.c"),
            "iters": _coerce(baseline.get("iters", 500), int, f"{source}:baseline.iters"),
        }
    workers = _coerce(data.get("workers", 1), int, f"{source}:workers")
    if workers < 1:
        raise ConfigError("workers must be >= 1", f"{source}:workers")
    return SuiteConfig(problems, solver, tuple(rules), baseline, workers)


def load_suite(path):
    return parse_suite(load_yaml(path), str(path))


def resolve_problem(ref, seed=0):
    """A library name, or a path to a YAML file describing one problem."""
    if ref in LIBRARY:
        return library_problem(ref, seed)
    data = load_yaml(ref)
    return problem_from_dict(data, str(ref))
