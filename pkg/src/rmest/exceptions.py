"""Exception hierarchy."""


class RMestError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(RMestError, ValueError):
    """Malformed input: bad representation, shape, weights or spec string."""


class DomainError(RMestError, ValueError):
    """Arguments outside the mathematical domain of an operation."""


class CutLocusError(DomainError):
    """A point lies at or beyond the cut locus of another (sphere antipodes)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ClassificationError(RMestError):
    """A loss's declared condition class is refuted on the sampling grid."""


class UnsupportedLossError(RMestError, ValueError):
    """The requested algorithm cannot be used with this loss."""


class DegenerateWeightsError(RMestError):
    """All IRLS weights vanished."""


class NotCoverableError(DomainError):
    """The sample cannot be enclosed in a ball below the injectivity radius."""
