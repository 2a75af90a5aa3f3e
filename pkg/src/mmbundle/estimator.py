"""Estimator-style front ends (``get_params`` / ``set_params`` / ``fit``)."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baseline import run_ppa
from .solver import SolverConfig, Status, solve
from .validation import check_vector


class BundleSolver(BaseEstimator):
    """Find a zero of a maximal monotone operator with the bundle method.

    Hyperparameters mirror :class:`~mmbundle.solver.SolverConfig`, minus the
    starting point which is passed to :meth:`fit`.

    Attributes
    ----------
    report_ : SolveReport
    solution_ : ndarray
        Final iterate (or the exact zero found during a line search).
    status_ : Status
    n_serious_ : int
    certificate_ : EnlargementElement or None
    """

    def __init__(
        self,
        tau=1e-3,
        radius=1.0,
        tol_stop=None,
        radius_floor=None,
        max_serious=10_000,
        max_null_per_serious=10_000,
        ck_rule="equal_sigma",
        lambda_rule="best_vertex",
        minnorm_tol=1e-9,
        bundle_cap=None,
    ):
        self.tau = tau
        self.radius = radius
        self.tol_stop = tol_stop
        self.radius_floor = radius_floor
        self.max_serious = max_serious
        self.max_null_per_serious = max_null_per_serious
        self.ck_rule = ck_rule
        self.lambda_rule = lambda_rule
        self.minnorm_tol = minnorm_tol
        self.bundle_cap = bundle_cap

    def make_config(self, x0):
        return SolverConfig(x0=x0, **self.get_params())

    def fit(self, operator, x0=None, on_record=None):
        """Run the solver from ``x0`` (origin if omitted)."""
        if x0 is None:
            x0 = np.zeros(operator.dimension)
        x0 = check_vector(x0, operator.dimension, name="x0")
        self.report_ = solve(operator, self.make_config(x0), on_record=on_record)
        self.solution_ = self.report_.x_final
        self.status_ = self.report_.status
        self.n_serious_ = self.report_.n_serious
        self.certificate_ = self.report_.certificate
        return self

    @property
    def converged_(self):
        check_is_fitted(self, "report_")
        return self.status_ is not Status.MAX_ITERATIONS


class ProximalPointSolver(BaseEstimator):
    """Exact proximal-point iteration ``x <- (I + cT)^{-1} x``; needs a closed-form resolvent."""

    def __init__(self, c=1.0, n_iter=500):
        self.c = c
        self.n_iter = n_iter

    def fit(self, operator, x0=None):
        if x0 is None:
            x0 = np.zeros(operator.dimension)
        self.path_ = run_ppa(operator, x0, self.c, self.n_iter)
        self.solution_ = self.path_[-1]
        return self
