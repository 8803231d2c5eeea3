"""Exception types shared across the package."""


class KerrgapError(Exception):
    """Base class for all package errors."""


class DomainError(KerrgapError, ValueError):
    """Input lies outside the domain of an operation."""


class SingularEvaluationError(DomainError):
    """Closed-form map evaluated on the axis or at the origin."""


class ConvergenceError(KerrgapError, RuntimeError):
    """Iterative solver ran out of budget.

    The final residual is kept on ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigurationError(KerrgapError, ValueError):
    pass


class CoverageError(KerrgapError, ValueError):
    """Requested region is not covered by the grid."""


class UsageError(KerrgapError, ValueError):
    pass


class ClassError(KerrgapError, ValueError):
    """Map is outside the admissible perturbation class."""


class DataError(KerrgapError, ValueError):
    pass


class InequalityViolation(KerrgapError, AssertionError):
    pass
