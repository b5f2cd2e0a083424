"""Exception hierarchy for the sphere propagator package."""


class SphereVGError(Exception):
    """Base class for every error raised by this package."""


class EndpointInsideSphere(SphereVGError, ValueError):
    pass


class DegeneratePlane(SphereVGError):
    """The plane of reflection is undefined (collinear endpoints)."""


class ZeroPolynomial(SphereVGError, ValueError):
    pass


class NoPhysicalRoot(SphereVGError):
    """No stationary reflection point is visible from both endpoints."""


class AmbiguousRoot(SphereVGError):
    pass


class NoConvergence(SphereVGError):
    pass


class NumericalInstability(SphereVGError):
    pass


class ShadowedInput(SphereVGError):
    """The endpoints lie in each other's geometric shadow."""

    def __init__(self, message, path_class=None):
        super().__init__(message)
        self.path_class = path_class
