"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: validation-type failures exit with 2,
precision and resource failures with 3.
"""


class BeurlingLabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(BeurlingLabError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ResourceError(BeurlingLabError, MemoryError):
    """A computation would exceed a configured memory or size budget."""


class PrecisionError(BeurlingLabError, ArithmeticError):
    """The working precision or discretisation cannot deliver the requested accuracy."""


class GeometryError(BeurlingLabError, ValueError):
    """A contour passes too close to a zero; the box should be perturbed."""


class ParameterError(BeurlingLabError, ValueError):
    """Experiment parameters admit no valid choice (e.g. K too small)."""


class ConsistencyError(BeurlingLabError, RuntimeError):
    """Two independent computations that must agree do not."""


class UsageError(BeurlingLabError, ValueError):
    """An operation was called in a way its contract does not allow."""


class NumericError(BeurlingLabError, ArithmeticError):
    """An iterative solver failed to converge."""
