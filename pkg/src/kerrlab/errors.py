"""Exception hierarchy shared by every kerrlab module."""


class KerrLabError(Exception):
    """Base class; the CLI maps any subclass to exit status 3."""


class DimensionMismatchError(KerrLabError, ValueError):
    pass


class ShapeError(DimensionMismatchError):
    pass


class TruncationError(KerrLabError):
    pass


class DegenerateCatError(KerrLabError):
    pass


class GridError(KerrLabError):
    pass


class OrderError(KerrLabError, ValueError):
    pass


class ConvergenceError(KerrLabError):
    pass


class EigsolverError(KerrLabError):
    pass


class NotFoundError(KerrLabError):
    pass


class NoWellError(KerrLabError):
    pass


class BelowThresholdError(KerrLabError):
    pass


class ToleranceError(KerrLabError):
    pass


class FitError(KerrLabError):
    pass


class SizeError(KerrLabError):
    pass


class ConventionError(KerrLabError):
    pass
