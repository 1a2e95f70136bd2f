"""Exception taxonomy shared by all modules.

Experiment runners map these onto process exit codes: schema problems
exit 1, violated assertions exit 2, capacity overruns exit 3.
"""


class BeurlingLabError(Exception):
    """Base class for all package errors."""


class DomainError(BeurlingLabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class CapacityError(BeurlingLabError, RuntimeError):
    """A configured size or memory budget would be exceeded.

    ``partial`` optionally carries how far the computation got.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ToleranceError(BeurlingLabError, RuntimeError):
    """Quadrature or series did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class EvaluationError(BeurlingLabError, ValueError):
    """An integrand evaluated to a non-finite value."""


class ConditioningError(BeurlingLabError, RuntimeError):
    """Problem too ill-conditioned for the requested computation."""


class ResolutionError(BeurlingLabError, ValueError):
    """Sampling grid too coarse for the requested measurement."""


class PoleError(BeurlingLabError, ZeroDivisionError):
    """Evaluation requested at a pole."""


class UnsupportedError(BeurlingLabError, NotImplementedError):
    """Input shape valid but outside the implemented scope."""


class SchemaError(BeurlingLabError, ValueError):
    """Configuration document failed validation.

    ``path`` points at the offending field.
    """

    def __init__(self, message, path=""):
        super().__init__(message)
        self.path = path
