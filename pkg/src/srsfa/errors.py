"""Exception hierarchy shared by all modules."""


class SrSfaError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(SrSfaError, ValueError):
    """Array shapes are inconsistent with each other."""


class DomainError(SrSfaError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class ErgodicityError(SrSfaError):
    """The Markov chain is not irreducible and aperiodic."""


class SingularityError(SrSfaError):
    """A stationary probability is zero where a strictly positive one is required."""


class SymmetryError(SrSfaError, ValueError):
    """A matrix that must be symmetric is not (within tolerance)."""


class DefinitenessError(SrSfaError):
    """A matrix that must be positive definite is singular or indefinite."""


class MissingStatisticError(SrSfaError, KeyError):
    """A requested lag or discount was not precomputed in an SfaStatistics."""
