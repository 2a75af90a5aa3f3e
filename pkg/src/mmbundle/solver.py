"""Bundle method with a double polyhedral approximation of the epsilon-enlargement.

The outer loop produces serious iterates ``x^k`` by projecting onto
separating halfspaces ``{z : <z - y, xi> <= 0}``; the inner loops pick the
search direction ``s`` (min-norm point of a reduced bundle around ``x^k``),
a trial point ``y = x^k - sigma s`` and an averaged vector ``v`` from a
second reduced bundle around ``y``. Every inequality the convergence theory
relies on is checked as the run proceeds.
"""

import enum
import numbers
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .exceptions import ContractViolation, InternalError, NumericalError
from .hull import Halfspace, SimplexWeights, min_norm_point, project_halfspace
from .oracle import eval_oracle
from .transport import BOUND_SLACK, EnlargementElement, transport_arrays
from .validation import check_positive, check_positive_int, check_vector

RADIUS_SLACK = 1e-12
CHECK_SLACK = 1e-9


class StepKind(str, enum.Enum):
    SERIOUS = "serious"
    NULL = "null"


class Origin(str, enum.Enum):
    SERIOUS_ITERATE = "serious_iterate"
    NULL_STEP = "null_step"


class Status(str, enum.Enum):
    EXACT_ZERO = "exact_zero"
    CONVERGED = "converged"
    CERTIFICATE = "certificate"
    MAX_ITERATIONS = "max_iterations"


class LambdaRule(str, enum.Enum):
    BEST_VERTEX = "best_vertex"
    MIN_NORM = "min_norm"
    UNIFORM = "uniform"


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Algorithm data and engineering guards.

    ``ck_rule`` is ``"equal_sigma"`` (``c_k = sigma_k``) or a positive float
    used as a constant ``c_k``. ``tol_stop=None`` means
    ``1e-8 * (1 + |u^0|)``; ``radius_floor=None`` means ``1e-12 * radius``.
    """

    x0: np.ndarray
    tau: float = 1e-3
    radius: float = 1.0
    tol_stop: Optional[float] = None
    radius_floor: Optional[float] = None
    max_serious: int = 10_000
    max_null_per_serious: int = 10_000
    ck_rule: Union[str, float] = "equal_sigma"
    lambda_rule: str = LambdaRule.BEST_VERTEX.value
    minnorm_tol: float = 1e-9
    bundle_cap: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "x0", check_vector(self.x0, name="x0").copy())
        check_positive(self.tau, "tau")
        check_positive(self.radius, "radius")
        if self.tol_stop is not None:
            check_positive(self.tol_stop, "tol_stop", strict=False)
        floor = 1e-12 * self.radius if self.radius_floor is None else self.radius_floor
        check_positive(floor, "radius_floor")
        if floor >= self.radius:
            raise ContractViolation("radius_floor must be smaller than radius")
        object.__setattr__(self, "radius_floor", float(floor))
        check_positive_int(self.max_serious, "max_serious")
        check_positive_int(self.max_null_per_serious, "max_null_per_serious")
        if self.ck_rule != "equal_sigma":
            if isinstance(self.ck_rule, str) or not isinstance(self.ck_rule, numbers.Real):
                raise ContractViolation(f"ck_rule must be 'equal_sigma' or a positive float, got {self.ck_rule!r}")
            check_positive(self.ck_rule, "ck_rule")
        try:
            object.__setattr__(self, "lambda_rule", LambdaRule(self.lambda_rule).value)
        except ValueError as exc:
            raise ContractViolation(f"unknown lambda_rule {self.lambda_rule!r}") from exc
        check_positive(self.minnorm_tol, "minnorm_tol")
        if self.bundle_cap is not None:
            check_positive_int(self.bundle_cap, "bundle_cap")

    def to_dict(self):
        return {
            "x0": self.x0.tolist(),
            "tau": self.tau,
            "radius": self.radius,
            "tol_stop": self.tol_stop,
            "radius_floor": self.radius_floor,
            "max_serious": self.max_serious,
            "max_null_per_serious": self.max_null_per_serious,
            "ck_rule": self.ck_rule,
            "lambda_rule": self.lambda_rule,
            "minnorm_tol": self.minnorm_tol,
            "bundle_cap": self.bundle_cap,
        }


@dataclass(frozen=True, eq=False)
class BundleEntry:
    z: np.ndarray
    w: np.ndarray
    origin: Origin
    index: int


class Bundle:
    """Raw bundle of graph pairs, stored in growable contiguous arrays.

    Positions (0-based) index the live entries; ``ids`` are stable
    1-based labels that survive ``bundle_cap`` pruning.
    """

    def __init__(self, dim, capacity=64):
        self._z = np.empty((capacity, dim))
        self._w = np.empty((capacity, dim))
        self._wnorm = np.empty(capacity)
        self._origin = np.empty(capacity, dtype=np.int8)
        self._ids = np.empty(capacity, dtype=np.int64)
        self.size = 0
        self._next_id = 1

    def __len__(self):
        return self.size

    @property
    def z(self):
        return self._z[: self.size]

    @property
    def w(self):
        return self._w[: self.size]

    @property
    def w_norms(self):
        return self._wnorm[: self.size]

    @property
    def ids(self):
        return self._ids[: self.size]

    def append(self, z, w, origin):
        if self.size == self._z.shape[0]:
            grow = self._z.shape[0]
            self._z = np.concatenate([self._z, np.empty_like(self._z[:grow])])
            self._w = np.concatenate([self._w, np.empty_like(self._w[:grow])])
            self._wnorm = np.concatenate([self._wnorm, np.empty(grow)])
            self._origin = np.concatenate([self._origin, np.empty(grow, dtype=np.int8)])
            self._ids = np.concatenate([self._ids, np.empty(grow, dtype=np.int64)])
        i = self.size
        self._z[i] = z
        self._w[i] = w
        self._wnorm[i] = np.linalg.norm(w)
        self._origin[i] = 0 if origin is Origin.SERIOUS_ITERATE else 1
        self._ids[i] = self._next_id
        self._next_id += 1
        self.size += 1
        return int(self._ids[i])

    def drop(self, positions):
        keep = np.ones(self.size, dtype=bool)
        keep[list(positions)] = False
        n = int(keep.sum())
        for arr in (self._z, self._w, self._wnorm, self._origin, self._ids):
            arr[:n] = arr[: self.size][keep]
        self.size = n

    def prune(self, cap, center, radius):
        """Drop oldest null-step entries outside ``B(center, radius)`` until ``size <= cap``."""
        excess = self.size - cap
        if excess <= 0:
            return []
        far = np.linalg.norm(self.z - center, axis=1) > radius
        candidates = np.flatnonzero(far & (self._origin[: self.size] == 1))[:excess]
        dropped = [int(i) for i in self.ids[candidates]]
        if len(candidates):
            self.drop(candidates)
        return dropped

    def entries(self):
        return [
            BundleEntry(
                z=self._z[i].copy(),
                w=self._w[i].copy(),
                origin=Origin.SERIOUS_ITERATE if self._origin[i] == 0 else Origin.NULL_STEP,
                index=int(self._ids[i]),
            )
            for i in range(self.size)
        ]

    @classmethod
    def from_entries(cls, entries):
        entries = list(entries)
        if not entries:
            raise ContractViolation("bundle needs at least one entry")
        bundle = cls(entries[0].z.shape[0], capacity=max(len(entries), 1))
        for e in entries:
            bundle.append(e.z, e.w, e.origin)
        return bundle


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """One inner iteration (null or serious step) of the bundle method.

    ``eps`` is the lambda-weighted transported enlargement size at ``y``;
    ``eps_literal`` reweights the same inner products with the direction
    weights ``alpha`` (zero outside the direction's index set) for comparison.
    """

    k: int
    n_k: int
    j_k: int
    l_k: int
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    v: np.ndarray
    xi: np.ndarray
    sigma: float
    c: float
    e: np.ndarray
    eps: float
    eps_literal: float
    eps_hat: float
    xhat: np.ndarray
    mu: float
    mu_hat: float
    step_kind: StepKind
    bundle_size: int
    x_next: Optional[np.ndarray] = None
    dropped: tuple = ()

    VECTOR_FIELDS = ("x", "s", "y", "v", "xi", "e", "xhat", "x_next")
    SCALAR_FIELDS = ("sigma", "c", "eps", "eps_literal", "eps_hat", "mu", "mu_hat")

    def to_dict(self):
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if isinstance(value, np.ndarray):
                value = value.tolist()
            elif isinstance(value, enum.Enum):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            out[name] = value
        return out

    @classmethod
    def from_dict(cls, data):
        kwargs = {}
        for name in cls.__dataclass_fields__:
            value = data.get(name)
            if name in cls.VECTOR_FIELDS and value is not None:
                value = np.asarray(value, dtype=float)
            elif name in cls.SCALAR_FIELDS:
                value = float("nan") if value is None else float(value)
            kwargs[name] = value
        kwargs["step_kind"] = StepKind(kwargs["step_kind"])
        kwargs["dropped"] = tuple(kwargs["dropped"] or ())
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class SolveReport:
    status: Status
    x_final: np.ndarray
    records: list
    bundle_size_final: int
    certificate: Optional[EnlargementElement] = None
    tol_stop: float = 0.0
    n_serious: int = 0
    n_oracle_calls: int = 0
    outer: list = field(default_factory=list)

    def serious_records(self):
        return [r for r in self.records if r.step_kind is StepKind.SERIOUS]


@dataclass
class SolverState:
    """Mutable state of one run; confined to a single :func:`solve` call."""

    spec: object
    config: SolverConfig
    bundle: Bundle
    x: np.ndarray
    u: Optional[np.ndarray] = None
    k: int = 0
    n: int = 0
    j: int = 0
    oracle_calls: int = 0
    tol_stop: Optional[float] = None
    warm: Optional[tuple] = None
    hint: int = 0

    @classmethod
    def start(cls, spec, config):
        x0 = check_vector(config.x0, spec.dimension, name="x0")
        return cls(spec=spec, config=config, bundle=Bundle(spec.dimension), x=x0.copy())

    def oracle(self, point):
        self.oracle_calls += 1
        out = eval_oracle(self.spec, point)
        if not np.all(np.isfinite(out)):
            raise NumericalError(
                f"oracle returned a non-finite value at k={self.k}, n={self.n}",
                record={"k": self.k, "n": self.n, "point": np.array(point), "value": out},
            )
        return out


@dataclass(frozen=True, eq=False)
class DirectionFound:
    j: int
    s: np.ndarray
    alpha: SimplexWeights
    positions: np.ndarray
    xhat: np.ndarray
    eps_hat: float
    mu_hat: float


@dataclass(frozen=True, eq=False)
class CertificateReached:
    j: int
    element: EnlargementElement
    mu_hat: float


@dataclass(frozen=True, eq=False)
class LineSearchResult:
    l: int
    y: np.ndarray
    xi: np.ndarray
    v: np.ndarray
    sigma: float
    eps: float
    eps_literal: float
    mu: float
    positions: np.ndarray
    zero_found: bool = False


def reduced_indices(bundle, center, radius):
    """Positions ``i`` with ``|z_i - center| <= radius`` (plus 1e-12 slack), in bundle order.

    ``bundle`` may be a :class:`Bundle` or a sequence of :class:`BundleEntry`.
    """
    if radius < 0:
        raise ContractViolation("radius must be >= 0")
    if not isinstance(bundle, Bundle):
        entries = list(bundle)
        if not entries:
            return np.empty(0, dtype=np.intp)
        zs = np.array([e.z for e in entries])
    else:
        zs = bundle.z
    d = zs - center
    dist = np.sqrt(np.einsum("ij,ij->i", d, d))
    return np.flatnonzero(dist <= radius + RADIUS_SLACK)


def search_direction(state, spec=None):
    """Shrink the ball around ``x^k`` until the min-norm point is long enough.

    Starts from ``state.j`` (reset to 0 by the caller at every new serious
    iterate, kept across null steps) and leaves ``state.j`` at the exit index.
    """
    cfg = state.config
    bundle = state.bundle
    if len(bundle) == 0:
        raise ContractViolation("search_direction needs a nonempty bundle")
    if state.j == 0 and state.hint > 0:
        state.j = _certified_prefix(state, state.hint)
        state.hint = 0
    while True:
        rad = cfg.radius * 2.0 ** -state.j
        pos = reduced_indices(bundle, state.x, rad)
        if pos.size == 0:
            raise InternalError("reduced bundle around x^k is empty; (x^k, u^k) is missing")
        ws = bundle.w[pos]
        zs = bundle.z[pos]
        threshold = cfg.tau * 2.0 ** -state.j
        # below the threshold any short enough hull point decides the test
        alpha, s = min_norm_point(
            ws,
            tol=cfg.minnorm_tol,
            index_set=pos,
            warm_start=_warm_rows(state.warm, bundle.ids[pos]),
            stop_below=threshold,
        )
        support = alpha.weights > 0
        state.warm = (bundle.ids[pos][support], alpha.weights[support])
        xhat, _, eps_hat = transport_arrays(np.zeros(pos.size), zs, ws, alpha.weights)
        if eps_hat < -1e-9:
            raise InternalError(f"transported eps_hat={eps_hat:.3e} is negative")
        eps_hat = max(eps_hat, 0.0)
        mu_hat = float(bundle.w_norms[pos].max())
        if np.linalg.norm(s) > threshold:
            return DirectionFound(state.j, s, alpha, pos, xhat, eps_hat, mu_hat)
        if cfg.radius * 2.0 ** -(state.j + 1) < cfg.radius_floor:
            return CertificateReached(state.j, EnlargementElement(xhat, s, eps_hat), mu_hat)
        state.j += 1


def _certified_prefix(state, level):
    """Number of leading ``j`` levels that a single solve at ``level`` certifies.

    The reduced sets are nested, so a hull point built from the ball of radius
    ``R 2^-level`` also lies in every larger ball; wherever its norm is below
    ``tau 2^-j`` the test at ``j`` fails to exit, exactly as a scan would find.
    Never skips past the radius-floor level, where a certificate must be issued.
    """
    cfg = state.config
    floor_level = 0
    while cfg.radius * 2.0 ** -(floor_level + 1) >= cfg.radius_floor:
        floor_level += 1
    level = min(level, floor_level)
    pos = reduced_indices(state.bundle, state.x, cfg.radius * 2.0 ** -level)
    if pos.size == 0:
        return 0
    alpha, s = min_norm_point(
        state.bundle.w[pos], tol=cfg.minnorm_tol, index_set=pos, stop_below=cfg.tau * 2.0 ** -level
    )
    support = alpha.weights > 0
    state.warm = (state.bundle.ids[pos][support], alpha.weights[support])
    ns = float(np.linalg.norm(s))
    start = 0
    while start <= level and ns <= cfg.tau * 2.0 ** -start:
        start += 1
    return min(start, floor_level)


def _warm_rows(warm, ids):
    """Rows of ``ids`` matching the previous support (bundle ids are increasing)."""
    if warm is None:
        return None
    prev_ids, prev_w = warm
    rows = np.searchsorted(ids, prev_ids)
    found = (rows < ids.shape[0]) & (ids[np.minimum(rows, ids.shape[0] - 1)] == prev_ids)
    if not found.any():
        return None
    return rows[found], prev_w[found]


def _lambda_weights(rule, ws, s, tol):
    m = ws.shape[0]
    if rule == LambdaRule.BEST_VERTEX.value:
        lam = np.zeros(m)
        lam[int(np.argmax(ws @ s))] = 1.0
        return lam
    if rule == LambdaRule.UNIFORM.value:
        return np.full(m, 1.0 / m)
    return np.asarray(min_norm_point(ws, tol=tol)[0].weights)


def line_search(state, spec, s, j_kn, direction=None):
    """Trial points ``y = x^k - R 2^-l s/|s|`` for ``l = 0 .. j_kn + 1``.

    Stops early once both serious-step inequalities hold. When ``|xi|`` is
    within ``tol_stop`` of zero the result carries ``zero_found=True``.
    """
    cfg = state.config
    bundle = state.bundle
    ns = float(np.linalg.norm(s))
    if ns <= 0.0:
        raise ContractViolation("line search needs a nonzero direction")
    half = 0.5 * float(s @ s)
    tol_stop = state.tol_stop
    l = 0
    while True:
        rad = cfg.radius * 2.0 ** -l
        sigma = rad / ns
        y = state.x - sigma * s
        xi = state.oracle(y)
        if np.linalg.norm(xi) <= tol_stop:
            return LineSearchResult(l, y, xi, xi, sigma, 0.0, 0.0, 0.0, np.empty(0, np.intp), True)
        pos = reduced_indices(bundle, y, rad)
        if pos.size == 0:
            raise InternalError(f"reduced bundle around y is empty at l={l}")
        ws = bundle.w[pos]
        zs = bundle.z[pos]
        lam = _lambda_weights(cfg.lambda_rule, ws, s, cfg.minnorm_tol)
        v = lam @ ws
        yhat, _, eps = transport_arrays(np.zeros(pos.size), zs, ws, lam)
        mu = float(bundle.w_norms[pos].max())
        # transport bound for exact graph pairs inside B(y, rad)
        bound = 2.0 * rad * mu
        if eps > bound + BOUND_SLACK:
            raise InternalError(f"eps={eps:.6g} exceeds transport bound {bound:.6g}")
        eps = max(eps, 0.0)
        eps_literal = float("nan")
        if direction is not None:
            a = np.zeros(len(bundle))
            a[direction.positions] = direction.alpha.weights
            inner = np.einsum("ij,ij->i", ws - v, zs - yhat)
            eps_literal = float(a[pos] @ inner)
        failing = float(v @ s) < half or float(s @ xi) < half
        if failing and l < j_kn + 1:
            l += 1
            continue
        return LineSearchResult(l, y, xi, v, sigma, eps, eps_literal, mu, pos)


def classify_step(s, v, xi):
    """Null iff ``<v, s> < |s|^2 / 2`` or ``<s, xi> < |s|^2 / 2``; ties are serious."""
    half = 0.5 * float(s @ s)
    if float(v @ s) < half or float(s @ xi) < half:
        return StepKind.NULL
    return StepKind.SERIOUS


def serious_update(x, y, xi):
    """Project ``x`` onto ``{z : <z - y, xi> <= 0}``; ``x`` must lie strictly outside."""
    if not np.any(xi):
        raise InternalError("serious update with xi = 0")
    if float((x - y) @ xi) <= 0.0:
        raise InternalError("serious update with x inside the halfspace; classification bug")
    return project_halfspace(x, Halfspace(y, xi))


def _check_record(rec, cfg):
    """Per-iteration runtime contracts; raise on violations beyond rounding slack."""
    for name in IterationRecord.VECTOR_FIELDS:
        value = getattr(rec, name)
        if value is not None and not np.all(np.isfinite(value)):
            raise NumericalError(f"non-finite {name} at k={rec.k}, n={rec.n_k}", record=rec)
    rad = cfg.radius * 2.0 ** -rec.l_k
    checks = [
        ("sigma_radius", abs(rec.sigma * np.linalg.norm(rec.s) - rad) <= CHECK_SLACK * max(1.0, rad)),
        ("y_ball", np.linalg.norm(rec.y - rec.x) <= rad + CHECK_SLACK),
        (
            "proximal_identity",
            np.linalg.norm(rec.c * rec.v + (rec.y - rec.x) - rec.e) <= 1e-12 * max(1.0, np.linalg.norm(rec.y - rec.x)),
        ),
    ]
    if rec.step_kind is StepKind.SERIOUS:
        half = 0.5 * float(rec.s @ rec.s)
        checks += [
            ("serious_vs", float(rec.v @ rec.s) >= half - CHECK_SLACK),
            ("serious_sxi", float(rec.s @ rec.xi) >= half - CHECK_SLACK),
            (
                "error_bound",
                rec.e @ rec.e <= rec.c**2 * (rec.v @ rec.v) + (rec.y - rec.x) @ (rec.y - rec.x) + CHECK_SLACK,
            ),
        ]
    for name, ok in checks:
        if not ok:
            raise InternalError(f"invariant {name} violated at k={rec.k}, n={rec.n_k}")


def solve(spec, config, on_record=None):
    """Run the bundle method on ``spec`` from ``config.x0``.

    ``on_record(kind, payload)`` is called with ``("outer", dict)`` at every
    stopping test and ``("step", IterationRecord)`` after every inner iteration.

    Returns
    -------
    SolveReport
    """
    cfg = config
    state = SolverState.start(spec, cfg)
    records = []
    outer = []
    certificate = None

    def emit(kind, payload):
        if on_record is not None:
            on_record(kind, payload)

    def finish(status, x_final):
        return SolveReport(
            status=status,
            x_final=np.array(x_final, dtype=float),
            records=records,
            bundle_size_final=len(state.bundle),
            certificate=certificate,
            tol_stop=state.tol_stop,
            n_serious=state.k,
            n_oracle_calls=state.oracle_calls,
            outer=outer,
        )

    while True:
        # step 0: stopping test
        u = state.oracle(state.x)
        state.u = u
        unorm = float(np.linalg.norm(u))
        if state.tol_stop is None:
            state.tol_stop = 1e-8 * (1.0 + unorm) if cfg.tol_stop is None else float(cfg.tol_stop)
        info = {"k": state.k, "x": state.x.copy(), "u": u.copy(), "u_norm": unorm, "bundle_size": len(state.bundle)}
        outer.append(info)
        emit("outer", info)
        if unorm == 0.0:
            return finish(Status.EXACT_ZERO, state.x)
        if unorm <= state.tol_stop:
            return finish(Status.CONVERGED, state.x)
        if state.k >= cfg.max_serious:
            return finish(Status.MAX_ITERATIONS, state.x)
        state.bundle.append(state.x, u, Origin.SERIOUS_ITERATE)
        state.n = 0
        state.hint, state.j = state.j, 0
        state.warm = None

        while True:
            direction = search_direction(state, spec)
            if isinstance(direction, CertificateReached):
                certificate = direction.element
                return finish(Status.CERTIFICATE, state.x)
            j = direction.j
            s = direction.s
            ls = line_search(state, spec, s, j, direction)
            if ls.zero_found:
                return finish(Status.CONVERGED, ls.y)

            kind = classify_step(s, ls.v, ls.xi)
            c = ls.sigma if cfg.ck_rule == "equal_sigma" else float(cfg.ck_rule)
            e = c * ls.v - ls.sigma * s
            x_next = serious_update(state.x, ls.y, ls.xi) if kind is StepKind.SERIOUS else None
            dropped = ()
            if kind is StepKind.NULL:
                if ls.l != j + 1:
                    raise InternalError("null step ended before l = j + 1")
                outside = np.setdiff1d(ls.positions, direction.positions)
                if outside.size and np.any(
                    np.linalg.norm(state.bundle.z[outside] - state.x, axis=1)
                    > cfg.radius * 2.0 ** -j + CHECK_SLACK
                ):
                    raise InternalError(f"null-step index set not inside the direction's at k={state.k}")
                state.bundle.append(ls.y, ls.xi, Origin.NULL_STEP)
                if cfg.bundle_cap is not None:
                    dropped = tuple(state.bundle.prune(cfg.bundle_cap, state.x, cfg.radius))
            rec = IterationRecord(
                k=state.k, n_k=state.n, j_k=j, l_k=ls.l,
                x=state.x.copy(), s=s, y=ls.y, v=ls.v, xi=ls.xi,
                sigma=ls.sigma, c=c, e=e, eps=ls.eps, eps_literal=ls.eps_literal,
                eps_hat=direction.eps_hat, xhat=direction.xhat,
                mu=ls.mu, mu_hat=direction.mu_hat, step_kind=kind,
                bundle_size=len(state.bundle), x_next=x_next, dropped=dropped,
            )
            _check_record(rec, cfg)
            records.append(rec)
            emit("step", rec)

            if kind is StepKind.NULL:
                state.n += 1
                if state.n >= cfg.max_null_per_serious:
                    return finish(Status.MAX_ITERATIONS, state.x)
                continue

            step = float(np.linalg.norm(x_next - state.x))
            floor = cfg.tau * cfg.radius * 2.0 ** (-2 * (j + 1))
            if step * float(np.linalg.norm(ls.xi)) <= floor - CHECK_SLACK:
                raise InternalError(f"serious step length below its floor at k={state.k}")
            state.x = x_next
            state.k += 1
            break

