"""Exception hierarchy shared by all modules."""


class ContractViolation(ValueError):
    """A caller broke a documented precondition (bad shape, empty input, ...)."""


class InternalError(RuntimeError):
    """An invariant the algorithm guarantees was observed to fail."""


class NumericalError(ArithmeticError):
    """A non-finite value appeared inside a solver run.

    ``record`` holds the offending iteration data when available.
    """

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class NotMonotoneError(ContractViolation):
    """Operator data fails the monotonicity check at construction."""
