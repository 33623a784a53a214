"""Exception types raised across the package."""


class LaserStateError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(LaserStateError, ValueError):
    pass


class TruncationError(LaserStateError, ValueError):
    """A truncated Fock space is too small for the requested state or evolution."""


class ValidationError(LaserStateError, ValueError):
    """An operator violates a density-operator or device contract."""


class DegenerateNormalization(LaserStateError, ZeroDivisionError):
    """A normalizing trace fell below the degeneracy threshold."""


class UnknownLabel(LaserStateError, KeyError):
    pass


class NoPhoton(LaserStateError):
    """Detection requested on a state that cannot emit a photon."""


class FourierResidue(LaserStateError, ArithmeticError):
    """A phase distribution summed from moments has a non-negligible imaginary part."""


class PreconditionError(LaserStateError, ValueError):
    """Inputs fall outside the regime where a closed form holds."""
