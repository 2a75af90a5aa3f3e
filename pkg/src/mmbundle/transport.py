"""Transportation formula for epsilon-enlargements and sampled membership checks.

Given triplets ``(eps_i, z_i, w_i)`` with ``w_i`` in the ``eps_i``-enlargement
at ``z_i`` and convex weights ``alpha``, the averaged pair
``(sum a_i z_i, sum a_i w_i)`` lies in the enlargement of size
``sum a_i eps_i + sum a_i <w_i - u_hat, z_i - x_hat>``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation
from .validation import check_positive, check_stack, check_vector

EPS_CLAMP = 1e-12
BOUND_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Triplet:
    eps: float
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.eps) or self.eps < 0:
            raise ContractViolation(f"triplet eps must be >= 0, got {self.eps!r}")
        z = check_vector(self.z, name="z")
        w = check_vector(self.w, z.shape[0], name="w")
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True, eq=False)
class EnlargementElement:
    """``uhat`` belongs to the ``epshat``-enlargement at ``xhat``."""

    xhat: np.ndarray
    uhat: np.ndarray
    epshat: float


def _weights(alpha, m):
    w = np.asarray(getattr(alpha, "weights", alpha), dtype=float)
    if w.shape != (m,):
        raise ContractViolation(f"{w.shape[0] if w.ndim else 0} weights for {m} triplets")
    return w


def transport_arrays(eps, zs, ws, weights):
    """Array form of :func:`transport`; returns ``(xhat, uhat, raw_epshat)`` unclamped."""
    xhat = weights @ zs
    uhat = weights @ ws
    inner = np.einsum("ij,ij->i", ws - uhat, zs - xhat)
    return xhat, uhat, float(weights @ eps + weights @ inner)


def transport(triplets, alpha):
    """Combine triplets with convex weights into a certified enlargement element."""
    triplets = list(triplets)
    if not triplets:
        raise ContractViolation("transport needs at least one triplet")
    weights = _weights(alpha, len(triplets))
    zs = check_stack([t.z for t in triplets], name="z")
    ws = check_stack([t.w for t in triplets], name="w")
    if ws.shape != zs.shape:
        raise ContractViolation("triplet dimensions disagree")
    eps = np.array([t.eps for t in triplets])
    xhat, uhat, epshat = transport_arrays(eps, zs, ws, weights)
    if epshat < -EPS_CLAMP:
        raise ContractViolation(
            f"transported eps is {epshat:.3e} < 0; some w_i is not in the claimed enlargement"
        )
    return EnlargementElement(xhat=xhat, uhat=uhat, epshat=max(epshat, 0.0))


def eps_bound_arrays(zs, ws, weights, center, rho):
    """Array form of :func:`eps_bound` for exact graph pairs (``eps_i = 0``)."""
    _, _, epshat = transport_arrays(np.zeros(zs.shape[0]), zs, ws, weights)
    bound = 2.0 * rho * float(np.sqrt(np.einsum("ij,ij->i", ws, ws).max()))
    return bound, max(epshat, 0.0) <= bound + BOUND_SLACK


def eps_bound(triplets, alpha, center, rho):
    """Check ``epshat <= 2 * rho * max|w_i|`` for exact graph triplets near ``center``.

    Returns ``(bound, holds)``.
    """
    triplets = list(triplets)
    rho = check_positive(rho, "rho")
    center = check_vector(center, name="center")
    for i, t in enumerate(triplets):
        if t.eps != 0.0:
            raise ContractViolation(f"triplet {i} has eps={t.eps}; the bound needs eps = 0")
        dist = float(np.linalg.norm(t.z - center))
        if dist > rho + BOUND_SLACK:
            raise ContractViolation(f"triplet {i} lies at distance {dist:.6g} > rho={rho:.6g}")
    element = transport(triplets, alpha)
    if np.linalg.norm(element.xhat - center) > rho + BOUND_SLACK:
        raise ContractViolation("averaged point left the ball; weights are not convex")
    zs = np.array([t.z for t in triplets])
    ws = np.array([t.w for t in triplets])
    return eps_bound_arrays(zs, ws, _weights(alpha, len(triplets)), center, rho)


def enlargement_residual(x, u, eps, sample):
    """``min_(y, y*) <y* - u, y - x> + eps`` over a graph sample.

    A negative value certifies ``u`` is *not* in the ``eps``-enlargement at ``x``.
    """
    if len(sample) == 0:
        raise ContractViolation("empty graph sample")
    x = check_vector(x, sample.points.shape[1], name="x")
    u = check_vector(u, x.shape[0], name="u")
    vals = np.einsum("ij,ij->i", sample.images - u, sample.points - x)
    return float(vals.min() + eps)


def enlargement_residuals(xs, us, eps, sample):
    """Vectorised :func:`enlargement_residual` for a batch of candidate elements.

    ``xs``, ``us`` have shape ``(B, N)``, ``eps`` shape ``(B,)``. Expands the
    inner product so the work is two matrix products against the sample.
    """
    xs = np.atleast_2d(xs)
    us = np.atleast_2d(us)
    ys, ystars = sample.points, sample.images
    base = np.einsum("ij,ij->i", ystars, ys)
    vals = base[None, :] - xs @ ystars.T - us @ ys.T
    return vals.min(axis=1) + np.einsum("ij,ij->i", us, xs) + np.asarray(eps, dtype=float)
