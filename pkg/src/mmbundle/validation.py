"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from .exceptions import ContractViolation


def check_vector(x, dim=None, name="x"):
    """Return ``x`` as a finite 1-D float64 array, optionally of length ``dim``."""
    try:
        arr = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ContractViolation(f"{name} is not convertible to a real vector") from exc
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ContractViolation(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    return arr


def check_matrix(a, dim=None, name="A"):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ContractViolation(f"{name} must be a square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ContractViolation(f"{name} has size {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    return arr


def check_stack(vectors, name="vectors"):
    """Stack a nonempty sequence of equal-length vectors into an (m, N) array."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1 and arr.size > 0:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ContractViolation(f"{name} must be a nonempty list of vectors of equal dimension")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    return arr


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ContractViolation(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ContractViolation(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ContractViolation(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ContractViolation(f"{name} must be a positive integer, got {value!r}")
    return int(value)
