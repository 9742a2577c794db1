"""Exception types raised by the engines in this package."""


class RegionBootError(Exception):
    """Base class for all errors raised by this package."""


class NonConvergence(RegionBootError):
    """An iterative solver (projection, contour inversion, root bracketing) failed."""


class NonSmoothPoint(RegionBootError):
    """A surface jet was requested at a point where one-sided derivatives disagree."""


class UnsupportedDim(RegionBootError):
    """The requested operation is only implemented for one boundary dimension."""


class InvalidScale(RegionBootError):
    """A variance parameter that must be positive was zero or negative."""


class CenterOffBoundary(RegionBootError):
    """A supplied resampling center does not lie on the region boundary."""


class RankDeficient(RegionBootError):
    """The weighted polynomial design matrix is numerically singular."""


class InsufficientScales(RegionBootError):
    """Too few (or unsuitable) scale points for the requested fit or stencil."""


class NonMonotoneSlice(RegionBootError):
    """A p-value slice is not monotone in the normal coordinate, so no single crossing exists."""
