"""Exception types shared across the package."""


class GciLabError(Exception):
    """Base class for all package errors."""


class InvalidMatrix(GciLabError):
    pass


class InvalidTolerance(GciLabError):
    pass


class SingularForm(GciLabError):
    pass


class ConstraintViolation(GciLabError):
    pass


class DimensionError(GciLabError):
    pass


class OriginNotInterior(GciLabError):
    pass


class NotPositiveDefinite(GciLabError):
    pass


class MassTooSmall(GciLabError):
    pass


class EmptyDensity(GciLabError):
    pass


class GridTooSmall(GciLabError):
    pass


class InvalidParameter(GciLabError):
    pass


class InvalidInput(GciLabError):
    pass


class NotCentered(GciLabError):
    pass


class NotLogConcave(GciLabError):
    pass


class NoConvergence(GciLabError):
    """Optimizer failed to converge; carries the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class MaxIterations(GciLabError):
    """Fixed-point iteration hit its cap; carries the best point found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class PreconditionFailed(GciLabError):
    pass


class NoSeries(GciLabError):
    pass
