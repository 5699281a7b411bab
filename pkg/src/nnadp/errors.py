"""Exception hierarchy shared by all modules."""


class NnadpError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(NnadpError):
    pass


class EmptyPolytope(GeometryError):
    pass


class UnboundedPolytope(GeometryError):
    pass


class UnsupportedDimension(GeometryError):
    pass


class DegeneratePolytope(GeometryError):
    """Polytope has no interior (Chebyshev radius at or below tolerance)."""


class SamplingStalled(GeometryError):
    pass


class NotInHull(GeometryError):
    pass


class LpError(NnadpError):
    pass


class Infeasible(LpError):
    pass


class Unbounded(LpError):
    pass


class InfeasibleStart(NnadpError):
    pass


class ToleranceNotMet(NnadpError):
    """Raised when an iterative solver exhausts its budget.

    The best iterate found so far is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class EmptyAdmissibleSet(NnadpError):
    pass


class ControllerFailure(NnadpError):
    def __init__(self, message, step=None, state=None):
        super().__init__(message)
        self.step = step
        self.state = state


class TrainingDiverged(NnadpError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(NnadpError):
    pass
