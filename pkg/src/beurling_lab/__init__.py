"""Numerical laboratory for Beurling generalized number systems.

Modules
-------
systems     generalized primes and the integers they generate
selberg     Dirichlet polynomials, the Beurling-Selberg majorant, mean value theorems
zeta        partial sums, mollifiers and zero-detecting polynomials
continuous  continuous systems built from the kernel G, their prime measures and counting functions
zeros       argument-principle zero counts, parameter zero lists, explicit formula checks
bounds      closed-form exponent functions and thresholds
expcli      experiment drivers and the command line
"""

from .errors import (BeurlingLabError, ConsistencyError, DomainError, GeometryError, NumericError,
                     ParameterError, PrecisionError, ResourceError, UsageError)
from .systems import (GenInteger, IntegerStream, PrimeSequence, WellBehavedCertificate,
                      classical_stream, enumerate_integers, rational_primes)
from .selberg import DirichletPolynomial, MajorantWindow, WellSpacedSet
from .continuous import ContinuousSystem, GKernel

__version__ = "0.1.0"

__all__ = [
    "BeurlingLabError", "ConsistencyError", "DomainError", "GeometryError", "NumericError",
    "ParameterError", "PrecisionError", "ResourceError", "UsageError",
    "GenInteger", "IntegerStream", "PrimeSequence", "WellBehavedCertificate",
    "classical_stream", "enumerate_integers", "rational_primes",
    "DirichletPolynomial", "MajorantWindow", "WellSpacedSet",
    "ContinuousSystem", "GKernel",
]
