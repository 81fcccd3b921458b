"""Exception hierarchy shared by all modules."""


class DislocnetError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DislocnetError, ValueError):
    """An argument lies outside the domain of the operation."""


class InadmissibleKernelError(DislocnetError):
    """The interaction kernel is not symmetric, even and uniformly positive."""


class InvalidNetworkError(DislocnetError, ValueError):
    """A dislocation network violates Burgers-vector conservation."""


class InfeasibleTopologyError(DislocnetError, ValueError):
    """A periodic network does not carry the declared macroscopic slip gradient."""


class ResolutionError(DislocnetError, ValueError):
    """A regularization length is not resolved by the sampling grid."""


class InvalidDensityError(DislocnetError, ValueError):
    """An energy density fails the positive 1-homogeneity check."""


class OutOfSpanError(DislocnetError, ValueError):
    """A slip gradient does not lie in the span of the slip basis."""


class DeskScaleError(DislocnetError, ValueError):
    """A direct real-space computation was requested on a too large grid."""
