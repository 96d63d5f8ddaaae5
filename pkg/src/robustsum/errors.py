"""Exception types raised by robustsum."""


class RobustSumError(Exception):
    """Base class for every error raised by this package."""


class InvalidFamily(RobustSumError):
    """A family violates a standing assumption (a term equals -inf, NaN, ...)."""


class UnknownBudgetExceeded(RobustSumError):
    """A countable family could not be decided within the term budget.

    ``bracket`` holds the best enclosure reached before giving up, when one
    exists.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class SizeLimit(RobustSumError):
    """Exhaustive enumeration was requested above the supported size."""


class DimensionMismatch(RobustSumError):
    """A point does not live in the space of the atom or family."""


class PreconditionViolated(RobustSumError):
    """An operation was called outside its stated preconditions."""


class Unsupported(RobustSumError):
    """The requested structure is not handled by this implementation."""


class InconclusiveGrowth(RobustSumError):
    """Numeric conjugation could neither bound nor certify escape to +inf."""


class BudgetExceeded(RobustSumError):
    """A combinatorial search ran out of budget."""


class EmptyDomain(RobustSumError):
    """No sampled point has a finite objective value."""


class NoConvergence(RobustSumError):
    """An iterative solver hit its iteration cap."""


class InstanceError(RobustSumError):
    """An instance file failed validation.

    ``pointer`` is a JSON pointer to the offending location.
    """

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"
