"""Exact proximal-point baseline used as a ground-truth comparator."""

import numpy as np

from .exceptions import ContractViolation
from .oracle import resolvent
from .validation import check_positive, check_vector


class ResolventUnavailable(ContractViolation):
    """The operator has no closed-form resolvent, so the baseline cannot run."""


def run_ppa(spec, x0, c, iters):
    """Return the trajectory ``x^0, x^1, ..., x^iters`` of ``x^{t+1} = J_c(x^t)``."""
    x = check_vector(x0, spec.dimension, name="x0").copy()
    check_positive(c, "c")
    if iters < 0:
        raise ContractViolation("iters must be >= 0")
    path = [x]
    for _ in range(int(iters)):
        x = resolvent(spec, x, c)
        if x is None:
            raise ResolventUnavailable(
                f"operator of kind {spec.kind!r} has no closed-form resolvent; "
                "the proximal-point baseline is unavailable"
            )
        path.append(x)
    if iters == 0 and resolvent(spec, path[0], c) is None:
        raise ResolventUnavailable(f"operator of kind {spec.kind!r} has no closed-form resolvent")
    return np.array(path)
