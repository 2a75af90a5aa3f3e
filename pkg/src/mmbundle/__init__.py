"""Bundle method for zeros of maximal monotone operators."""

from .estimator import BundleSolver, ProximalPointSolver
from .exceptions import ContractViolation, InternalError, NotMonotoneError, NumericalError
from .hull import Halfspace, SimplexWeights, min_norm_point, project_halfspace
from .oracle import (
    Affine,
    GraphSample,
    MaxAffinSubdiff,
    MaxAffineSubdiff,
    OperatorSpec,
    ScaledL1Subdiff,
    Sum,
    eval_oracle,
    resolvent,
    sample_graph,
    spec_from_dict,
)
from .solver import SolverConfig, SolveReport, Status, StepKind, solve
from .transport import EnlargementElement, Triplet, enlargement_residual, eps_bound, transport

__version__ = "0.1.0"
