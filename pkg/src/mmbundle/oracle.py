"""Operator oracles: full-domain maximal monotone test operators.

Every operator is immutable after construction and exposes a deterministic
single-valued selection ``evaluate(x)`` from ``T(x)``. Some of them also know
their resolvent ``(I + cT)^{-1}`` in closed form; the bundle solver never uses
it, only the proximal-point baseline does.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import ContractViolation, InternalError, NotMonotoneError
from .validation import check_matrix, check_positive, check_positive_int, check_stack, check_vector

MONOTONE_EIG_TOL = 1e-10
TIE_TOL = 1e-12

#: Recorded in trace headers so samples can be regenerated elsewhere.
SAMPLER_ALGORITHM = (
    "numpy.random.default_rng(seed) [PCG64]; per point: d = standard_normal(N), "
    "d /= |d|, r = radius * uniform()**(1/N), y = center + r*d"
)


class OperatorSpec:
    """Base class of the operator library.

    Subclasses implement :meth:`evaluate`, :meth:`local_bound` and
    :meth:`to_dict`; :meth:`resolvent` defaults to unavailable (``None``).
    """

    kind = None
    dimension: int

    def evaluate(self, x):
        raise NotImplementedError

    def evaluate_batch(self, points):
        """Row-wise :meth:`evaluate` over an ``(m, N)`` array."""
        return np.array([self.evaluate(y) for y in points])

    def resolvent(self, x, c):
        return None

    def local_bound(self, center, radius):
        """Upper bound on ``|u|`` for ``u`` selected anywhere in ``B(center, radius)``."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def __call__(self, x):
        return eval_oracle(self, x)


@dataclass(frozen=True, eq=False)
class Affine(OperatorSpec):
    """``T(x) = A x + b`` with ``A + A^T`` positive semidefinite."""

    matrix: np.ndarray
    offset: np.ndarray
    dimension: int = field(init=False)
    kind = "affine"

    def __post_init__(self):
        a = check_matrix(self.matrix, name="matrix").copy()
        b = check_vector(self.offset, a.shape[0], name="offset").copy()
        min_eig = np.linalg.eigvalsh(0.5 * (a + a.T))[0]
        if min_eig < -MONOTONE_EIG_TOL:
            raise NotMonotoneError(
                f"affine operator is not monotone: smallest eigenvalue of sym(A) is {min_eig:.3e}"
            )
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "offset", b)
        object.__setattr__(self, "dimension", a.shape[0])

    def evaluate(self, x):
        return self.matrix @ x + self.offset

    def evaluate_batch(self, points):
        return points @ self.matrix.T + self.offset

    def resolvent(self, x, c):
        n = self.dimension
        lu, piv = scipy.linalg.lu_factor(np.eye(n) + c * self.matrix)
        if np.any(np.diag(lu) == 0.0):
            raise InternalError("I + cA is singular; A cannot be monotone")
        return scipy.linalg.lu_solve((lu, piv), x - c * self.offset)

    def local_bound(self, center, radius):
        norm_a = np.linalg.norm(self.matrix, 2)
        return float(norm_a * (np.linalg.norm(center) + radius) + np.linalg.norm(self.offset))

    def to_dict(self):
        return {"kind": self.kind, "matrix": self.matrix.tolist(), "offset": self.offset.tolist()}


@dataclass(frozen=True, eq=False)
class MaxAffineSubdiff(OperatorSpec):
    """Subdifferential of ``f(x) = max_j <a_j, x> + b_j``.

    The selection is the slope of the lowest-index active piece.
    """

    slopes: np.ndarray
    intercepts: np.ndarray
    dimension: int = field(init=False)
    kind = "max_affine"

    def __post_init__(self):
        slopes = check_stack(self.slopes, name="slopes").copy()
        intercepts = check_vector(self.intercepts, slopes.shape[0], name="intercepts").copy()
        slopes.setflags(write=False)
        intercepts.setflags(write=False)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "intercepts", intercepts)
        object.__setattr__(self, "dimension", slopes.shape[1])

    @classmethod
    def from_pieces(cls, pieces):
        pieces = list(pieces)
        if not pieces:
            raise ContractViolation("max-affine operator needs at least one piece")
        return cls([p[0] for p in pieces], [p[1] for p in pieces])

    def evaluate(self, x):
        values = self.slopes @ x + self.intercepts
        active = np.flatnonzero(values >= values.max() - TIE_TOL)
        return self.slopes[active[0]].copy()

    def evaluate_batch(self, points):
        values = points @ self.slopes.T + self.intercepts
        active = values >= values.max(axis=1, keepdims=True) - TIE_TOL
        return self.slopes[np.argmax(active, axis=1)]

    def local_bound(self, center, radius):
        return float(np.linalg.norm(self.slopes, axis=1).max())

    def to_dict(self):
        return {
            "kind": self.kind,
            "pieces": [[a.tolist(), float(b)] for a, b in zip(self.slopes, self.intercepts)],
        }


MaxAffinSubdiff = MaxAffineSubdiff


@dataclass(frozen=True, eq=False)
class ScaledL1Subdiff(OperatorSpec):
    """Subdifferential of ``sum_i w_i |x_i|`` with ``sign(0) = 0``."""

    weights: np.ndarray
    dimension: int = field(init=False)
    kind = "scaled_l1"

    def __post_init__(self):
        w = check_vector(self.weights, name="weights").copy()
        if np.any(w <= 0):
            raise ContractViolation("scaled-L1 weights must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "dimension", w.shape[0])

    def evaluate(self, x):
        return self.weights * np.sign(x)

    def evaluate_batch(self, points):
        return self.weights * np.sign(points)

    def resolvent(self, x, c):
        return np.sign(x) * np.maximum(np.abs(x) - c * self.weights, 0.0)

    def local_bound(self, center, radius):
        return float(np.linalg.norm(self.weights))

    def to_dict(self):
        return {"kind": self.kind, "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class Sum(OperatorSpec):
    """Pointwise sum of full-domain maximal monotone operators."""

    children: tuple
    dimension: int = field(init=False)
    kind = "sum"

    def __post_init__(self):
        children = tuple(self.children)
        if not children:
            raise ContractViolation("sum operator needs at least one child")
        dims = {c.dimension for c in children}
        if len(dims) != 1:
            raise ContractViolation(f"sum children disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "dimension", dims.pop())

    def evaluate(self, x):
        out = self.children[0].evaluate(x)
        for child in self.children[1:]:
            out = out + child.evaluate(x)
        return out

    def evaluate_batch(self, points):
        out = self.children[0].evaluate_batch(points)
        for child in self.children[1:]:
            out = out + child.evaluate_batch(points)
        return out

    def local_bound(self, center, radius):
        return float(sum(c.local_bound(center, radius) for c in self.children))

    def to_dict(self):
        return {"kind": self.kind, "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True, eq=False)
class GraphSample:
    """Pairs ``(y, ystar)`` with ``ystar`` the oracle selection at ``y``."""

    points: np.ndarray
    images: np.ndarray
    seed: int
    count: int

    def __iter__(self):
        return iter(zip(self.points, self.images))

    def __len__(self):
        return self.count


def eval_oracle(spec, x):
    """Return the deterministic selection ``u in T(x)``."""
    x = check_vector(x, spec.dimension)
    return spec.evaluate(x)


def resolvent(spec, x, c):
    """Exact resolvent ``y = (I + cT)^{-1} x``, or ``None`` when no closed form is known."""
    x = check_vector(x, spec.dimension)
    c = check_positive(c, "c")
    return spec.resolvent(x, c)


def sample_ball(center, radius, count, seed):
    """``count`` points uniform in the Euclidean ball (see :data:`SAMPLER_ALGORITHM`)."""
    center = check_vector(center, name="center")
    radius = check_positive(radius, "radius")
    count = check_positive_int(count, "count")
    n = center.shape[0]
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((count, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.uniform(size=count) ** (1.0 / n)
    return center + radii[:, None] * directions


def sample_graph(spec, center, radius, count, seed):
    center = check_vector(center, spec.dimension, name="center")
    points = sample_ball(center, radius, count, seed)
    images = spec.evaluate_batch(points)
    return GraphSample(points=points, images=images, seed=int(seed), count=int(count))


def spec_from_dict(data):
    """Build an operator from its plain-data description (inverse of ``to_dict``)."""
    if not isinstance(data, dict) or "kind" not in data:
        raise ContractViolation(f"operator description must be a mapping with a 'kind': {data!r}")
    kind = data["kind"]
    try:
        if kind == "affine":
            matrix = np.asarray(data["matrix"], dtype=float)
            offset = data.get("offset", np.zeros(matrix.shape[0]))
            return Affine(matrix, offset)
        if kind == "max_affine":
            return MaxAffineSubdiff.from_pieces(data["pieces"])
        if kind == "scaled_l1":
            return ScaledL1Subdiff(data["weights"])
        if kind == "sum":
            return Sum(tuple(spec_from_dict(c) for c in data["children"]))
    except KeyError as exc:
        raise ContractViolation(f"operator of kind {kind!r} is missing field {exc}") from exc
    raise ContractViolation(f"unknown operator kind {kind!r}")
