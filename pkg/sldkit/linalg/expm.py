from __future__ import annotations

import numpy as np
import scipy.linalg

from sldkit.errors import SolverError
from sldkit.linalg.density import ComplexMatrix, as_complex_matrix, hermitize

# Largest exponent before exp() leaves float64 range.
MAX_LOG_NORM = 700.0


class OverflowRisk(SolverError):
    pass


def log_norm_bound(a: ComplexMatrix) -> float:
    """Logarithmic 2-norm mu(a), the top eigenvalue of (a + a^H)/2; ||e^a||_2 <= exp(mu(a)).

    Only this scalar bound looks at a spectrum; e^a itself is never diagonalized.
    """
    return float(np.linalg.eigvalsh(hermitize(a))[-1])


def matrix_exponential(a: ComplexMatrix) -> ComplexMatrix:
    """e^a by scaling-and-squaring with a degree-13 Pade approximant.

    Never diagonalizes ``a``, so it stays independent of the eigen-based routes.
    Decaying exponentials such as e^{-rho s} are safe at any s; growing ones are
    refused once the result could overflow.
    """
    arr = as_complex_matrix(a)
    mu = log_norm_bound(arr)
    if mu > MAX_LOG_NORM:
        raise OverflowRisk(
            f"log-norm bound {mu:.3e} exceeds {MAX_LOG_NORM:.0f}; e^a would overflow"
        )
    return np.asarray(scipy.linalg.expm(arr), dtype=np.complex128)
