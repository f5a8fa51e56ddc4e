"""Successor representations, Markov chain spectra and slow feature analysis."""

from .errors import (
    DefinitenessError,
    DimensionError,
    DomainError,
    ErgodicityError,
    MissingStatisticError,
    SingularityError,
    SrSfaError,
    SymmetryError,
)

__version__ = "0.1.0"
