"""Exception hierarchy shared by all modules."""


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class UnboundedBodyError(GeometryError):
    pass


class OriginNotInteriorError(GeometryError):
    pass


class NotOnBoundaryError(GeometryError):
    pass


class NonConvexError(GeometryError):
    pass


class ZeroGradientError(GeometryError):
    """Raised on the declared exception set of an implicit body."""


class UnsupportedRepresentationError(GeometryError):
    pass


class DimensionUnsupportedError(GeometryError):
    pass


class EmptyBodyError(GeometryError):
    """A floating body or intersection turned out empty (or without interior)."""


class ParameterRangeError(GeometryError):
    pass


class DensityError(GeometryError):
    pass


class ContainmentError(GeometryError):
    pass


class AcceptanceRateError(GeometryError):
    pass


class CentroidError(GeometryError):
    """A star body that must be centred at the origin is not."""


class SingularMapError(GeometryError):
    pass
