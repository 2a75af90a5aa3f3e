"""Convex-geometric kernels: min-norm point of a convex hull, halfspace projection."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation
from .validation import check_stack, check_vector

WOLFE_TOL = 1e-9
WEIGHT_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class SimplexWeights:
    """Convex weights over ``index_set`` (bundle indices, or ``0..m-1``)."""

    weights: np.ndarray
    index_set: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.shape[0] != len(self.index_set):
            raise ContractViolation("weights and index_set must have equal length")
        if w.shape[0] == 0:
            raise ContractViolation("empty simplex")
        if np.any(w < -WEIGHT_EPS):
            raise ContractViolation(f"negative simplex weight {w.min():.3e}")
        w = np.clip(w, 0.0, None)
        if abs(w.sum() - 1.0) > 1e-9:
            raise ContractViolation(f"simplex weights sum to {w.sum():.12g}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "index_set", tuple(np.asarray(self.index_set, dtype=np.int64).tolist()))

    @classmethod
    def vertex(cls, position, index_set):
        w = np.zeros(len(index_set))
        w[position] = 1.0
        return cls(w, index_set)

    @classmethod
    def uniform(cls, index_set):
        m = len(index_set)
        return cls(np.full(m, 1.0 / m), index_set)

    def __len__(self):
        return len(self.index_set)


@dataclass(frozen=True, eq=False)
class Halfspace:
    """``{z : <z - anchor, normal> <= 0}``."""

    anchor: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        y = check_vector(self.anchor, name="anchor")
        v = check_vector(self.normal, y.shape[0], name="normal")
        if not np.any(v):
            raise ContractViolation("halfspace normal must be nonzero")
        object.__setattr__(self, "anchor", y)
        object.__setattr__(self, "normal", v)

    def contains(self, z):
        return float(np.dot(z - self.anchor, self.normal)) <= 0.0


def project_simplex(v):
    """Euclidean projection of ``v`` onto the unit simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.shape[0] + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def wolfe_gap(points, s):
    """``max_i <s - p_i, s>``; nonpositive up to rounding iff ``s`` is the min-norm point."""
    return float(s @ s - (points @ s).min())


def _affine_minimizer(corral_points):
    """Weights ``mu`` (summing to one) of the min-norm point of the affine hull.

    Solved as least squares in the edge directions ``p_i - p_0`` rather than
    through the Gram matrix, which squares the condition number. Returns
    ``None`` when the corral is affinely dependent.
    """
    k = corral_points.shape[0]
    if k == 1:
        return np.ones(1)
    q0 = corral_points[0]
    edges = (corral_points[1:] - q0).T
    nu, _, rank, _ = np.linalg.lstsq(edges, -q0, rcond=1e-12)
    if rank < k - 1:
        return None
    return np.concatenate([[1.0 - nu.sum()], nu])


def _minor_cycle(points, corral, lam):
    """Move to the min-norm point of the affine hull of ``corral``, dropping vertices on the way."""
    while len(corral) > 1:
        mu = _affine_minimizer(points[corral])
        if mu is None:
            # affinely dependent corral: drop the lightest old vertex
            drop = int(np.argmin(lam[:-1]))
            del corral[drop]
            lam = _clean(np.delete(lam, drop), uniform_if_zero=True)
            continue
        if np.all(mu > WEIGHT_EPS):
            return corral, mu
        mask = (mu <= WEIGHT_EPS) & (lam - mu > 0)
        theta = np.min(lam[mask] / (lam[mask] - mu[mask])) if np.any(mask) else 0.0
        theta = min(max(theta, 0.0), 1.0)
        lam = lam + theta * (mu - lam)
        keep = lam > WEIGHT_EPS
        if keep.all():
            keep[int(np.argmin(lam))] = False
        corral = [c for c, kept in zip(corral, keep) if kept]
        lam = _clean(lam[keep], uniform_if_zero=True)
    return corral, np.ones(1)


def _wolfe(points, max_major, corral=None, lam=None, stop_below=0.0):
    sq = np.einsum("ij,ij->i", points, points)
    pmax = float(np.sqrt(sq.max()))

    if corral is None:
        corral = [int(np.argmin(sq))]
        lam = np.ones(1)
    else:
        corral, lam = _minor_cycle(points, list(corral), _clean(lam, uniform_if_zero=True))
    s = lam @ points[corral]
    for _ in range(max_major):
        dots = points @ s
        j = int(np.argmin(dots))
        ss = float(s @ s)
        norm_s = np.sqrt(ss)
        if norm_s <= max(1e-15 * pmax, stop_below):
            return corral, lam, True
        # relative to |s|^2, plus the rounding floor of the dot products
        if ss - dots[j] <= 1e-13 * ss + 1e-15 * pmax * norm_s or j in corral:
            return corral, lam, True
        corral_next, lam_next = _minor_cycle(points, corral + [j], np.append(lam, 0.0))
        s_next = lam_next @ points[corral_next]
        if s_next @ s_next >= ss:
            # no progress (rounding); keep the better iterate
            return corral, lam, True
        corral, lam, s = corral_next, lam_next, s_next
    return corral, lam, False


def _projected_gradient(points, alpha, iters):
    """Accelerated projected gradient on ``min |P^T a|^2`` over the simplex."""
    lipschitz = 2.0 * max(np.linalg.norm(points, 2) ** 2, 1e-300)
    a = alpha.copy()
    z = a.copy()
    t = 1.0
    for _ in range(iters):
        grad = 2.0 * points @ (points.T @ z)
        a_next = project_simplex(z - grad / lipschitz)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = a_next + ((t - 1.0) / t_next) * (a_next - a)
        a, t = a_next, t_next
    return a


def _clean(alpha, uniform_if_zero=False):
    alpha = np.clip(alpha, 0.0, None)
    total = alpha.sum()
    if total <= 0.0 and uniform_if_zero:
        return np.full(alpha.shape[0], 1.0 / alpha.shape[0])
    return alpha / total


def min_norm_point(vectors, tol=WOLFE_TOL, index_set=None, warm_start=None, stop_below=None):
    """Shortest vector of ``conv(vectors)``.

    Wolfe's method with active-set corrections; if it stalls without meeting
    ``<v_i - s, s> >= -tol * (1 + |s|^2)`` for all ``i``, accelerated
    projected gradient polishes the weights.

    Parameters
    ----------
    vectors : sequence of 1-D arrays, all of the same dimension
    tol : float
        Relative tolerance of the Wolfe optimality criterion.
    index_set : sequence of int, optional
        Labels attached to the returned weights (defaults to ``range(m)``).
    warm_start : (rows, weights), optional
        Initial corral as row positions into ``vectors`` with positive
        weights, e.g. the support of a previous solution on a nested set.
    stop_below : float, optional
        Return the first iterate with ``|s| <= stop_below``. The result is
        then a point of the hull that short, not necessarily the shortest.

    Returns
    -------
    (SimplexWeights, ndarray)
        Convex weights and the point ``s = sum_i alpha_i v_i``.
    """
    points = check_stack(vectors)
    m, n = points.shape
    if index_set is None:
        index_set = tuple(range(m))
    if len(index_set) != m:
        raise ContractViolation("index_set length differs from number of vectors")
    if m == 1:
        return SimplexWeights(np.ones(1), index_set), points[0].copy()

    corral, lam = None, None
    if warm_start is not None:
        rows, weights = warm_start
        rows = [int(r) for r in rows]
        if rows and len(rows) == len(weights):
            corral, lam = rows, np.asarray(weights, dtype=float)
    stop_below = 0.0 if stop_below is None else float(stop_below)
    corral, lam, _ = _wolfe(
        points, max_major=10 * m + 50, corral=corral, lam=lam, stop_below=stop_below
    )
    alpha = np.zeros(m)
    alpha[corral] = lam
    alpha = _clean(alpha)
    s = alpha @ points
    if s @ s <= stop_below**2:
        return SimplexWeights(alpha, index_set), s
    if wolfe_gap(points, s) > tol * (1.0 + s @ s):
        polished = _clean(_projected_gradient(points, alpha, iters=max(10 * n * n, 100)))
        s_pol = polished @ points
        if s_pol @ s_pol < s @ s:
            alpha, s = polished, s_pol
    return SimplexWeights(alpha, index_set), s


def project_halfspace(x, h):
    """Euclidean projection of ``x`` (assumed outside ``h``) onto the halfspace ``h``."""
    x = check_vector(x, h.anchor.shape[0])
    v = h.normal
    vv = float(v @ v)
    if vv == 0.0:
        raise ContractViolation("halfspace normal must be nonzero")
    return x - (float((x - h.anchor) @ v) / vv) * v
