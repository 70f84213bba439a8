"""Density matrices, spectra and the eigen-free matrix exponential."""

from sldkit.linalg.density import (
    ComplexMatrix,
    DensityMatrix,
    DensityTolerances,
    InvalidDensity,
    NotHermitian,
    NotPositive,
    TraceNotOne,
    validate_density,
)
from sldkit.linalg.expm import OverflowRisk, matrix_exponential
from sldkit.linalg.spectrum import (
    EigenFailure,
    EmptySupport,
    Spectrum,
    spectral_decompose,
    support_inverse,
)

__all__ = [
    "ComplexMatrix",
    "DensityMatrix",
    "DensityTolerances",
    "EigenFailure",
    "EmptySupport",
    "InvalidDensity",
    "NotHermitian",
    "NotPositive",
    "OverflowRisk",
    "Spectrum",
    "TraceNotOne",
    "matrix_exponential",
    "spectral_decompose",
    "support_inverse",
    "validate_density",
]
