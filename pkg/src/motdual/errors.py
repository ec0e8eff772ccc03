"""Exception types raised across the package."""


class MOTError(Exception):
    """Base class for all package errors."""


class NotInConvexOrder(MOTError):
    """The pair (mu, nu) is not ordered in the convex order."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InconsistentSplit(MOTError):
    """Endpoint masses of a component could not be solved consistently."""


class Infeasible(MOTError):
    """The martingale transport LP has no feasible point."""


class Unbounded(MOTError):
    """The LP objective is unbounded below (malformed cost)."""


class SlacknessViolated(MOTError):
    """LP dual multipliers fail complementary slackness on the coupling support."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ShapeViolation(MOTError):
    """A normalized component dual does not have the expected sign pattern."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class GlueViolation(MOTError):
    """Component duals are incompatible across components."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotCompact(MOTError):
    """An interval that must be bounded is not."""


class RootFindFailed(MOTError):
    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class BadParameters(MOTError):
    pass
