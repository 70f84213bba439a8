"""States obeying rho^2 = alpha rho - beta 1: closed-form SLD and the qubit Bloch forms."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from sldkit.errors import ClassViolation, InputError, bound_message
from sldkit.linalg.density import (
    ComplexMatrix,
    DensityMatrix,
    as_complex_matrix,
    max_abs,
    validate_density,
)
from sldkit.linalg.spectrum import (
    Spectrum,
    eigenvalue_clusters,
    spectral_decompose,
    support_inverse,
)
from sldkit.sld.operator import SLDOperator, check_derivative, sld_from_spectrum

DEFAULT_CLASS_TOL = 1e-9
PURE_BLOCH_MARGIN = 1e-8
SPLIT_FACTOR = 100.0

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)
SIGMA_Y = PAULI[1]


class InvalidBloch(InputError):
    pass


@dataclass(frozen=True)
class QuadraticClassCoefficients:
    """alpha = p+ + p-, beta = p+ p-; the derivatives belong to one parameter."""

    alpha: float
    beta: float
    p_plus: float
    p_minus: float
    support_rank: int
    dim: int
    d_alpha: float = 0.0
    d_beta: float = 0.0

    @property
    def eig_pair(self) -> tuple[float, float]:
        return (self.p_plus, self.p_minus)

    @property
    def purity(self) -> float:
        return self.alpha - self.dim * self.beta

    def with_derivatives(self, d_alpha: float, d_beta: float) -> QuadraticClassCoefficients:
        return replace(self, d_alpha=d_alpha, d_beta=d_beta)


def class_relation_residual(rho: ComplexMatrix, alpha: float, beta: float) -> float:
    """max |rho^2 - alpha rho + beta 1|."""
    identity = np.eye(rho.shape[0], dtype=np.complex128)
    return max_abs(rho @ rho - alpha * rho + beta * identity)


def detect_quadratic_class(
    spectrum: Spectrum, tol: float = DEFAULT_CLASS_TOL
) -> QuadraticClassCoefficients | None:
    clusters = eigenvalue_clusters(spectrum, tol)
    m, d = spectrum.support_rank, spectrum.dim
    if len(clusters) == 2 and m == d:
        p_plus, p_minus = clusters[0][0], clusters[1][0]
        alpha, beta = p_plus + p_minus, p_plus * p_minus
    elif len(clusters) == 1 and m < d:
        # Single value on the support; the kernel eigenvalue is the second root.
        p_plus, p_minus = clusters[0][0], 0.0
        alpha, beta = p_plus, 0.0
    else:
        return None

    if class_relation_residual(spectrum.reconstruct(), alpha, beta) > 10 * tol:
        return None
    return QuadraticClassCoefficients(
        alpha=alpha, beta=beta, p_plus=p_plus, p_minus=p_minus, support_rank=m, dim=d
    )


def _cluster_rates(
    spectrum: Spectrum, drho: ComplexMatrix, tol: float
) -> list[tuple[float, float]]:
    """(eigenvalue, derivative) per support cluster; derivative = Tr(P_c drho) / dim P_c.

    The class survives along the parameter only if drho restricted to each cluster
    is a multiple of the identity there.
    """
    rates: list[tuple[float, float]] = []
    for value, members in eigenvalue_clusters(spectrum, tol):
        vectors = spectrum.eigenvectors[:, members]
        block = vectors.conj().T @ drho @ vectors
        rate = float(np.real(np.trace(block))) / len(members)
        split = max_abs(block - rate * np.eye(len(members)))
        bound = SPLIT_FACTOR * tol * max(1.0, max_abs(drho))
        if split > bound:
            raise ClassViolation(
                bound_message("eigenvalue cluster splitting along the parameter", split, bound),
                split,
                bound,
            )
        rates.append((value, rate))
    return rates


def coefficient_derivatives(
    spectrum: Spectrum,
    coeffs: QuadraticClassCoefficients,
    drho: ArrayLike,
    tol: float = DEFAULT_CLASS_TOL,
) -> tuple[float, float]:
    """(d alpha, d beta) from first-order eigenvalue shifts of each cluster."""
    d = check_derivative(drho, spectrum.dim)
    rates = _cluster_rates(spectrum, d, tol)
    if coeffs.beta == 0.0:
        return rates[0][1], 0.0
    (p_plus, dp_plus), (p_minus, dp_minus) = rates
    return dp_plus + dp_minus, p_minus * dp_plus + p_plus * dp_minus


def closed_form_coefficients(
    spectrum: Spectrum, drho: ArrayLike, tol: float = DEFAULT_CLASS_TOL
) -> QuadraticClassCoefficients | None:
    coeffs = detect_quadratic_class(spectrum, tol)
    if coeffs is None:
        return None
    d_alpha, d_beta = coefficient_derivatives(spectrum, coeffs, drho, tol)
    return coeffs.with_derivatives(d_alpha, d_beta)


def sld_quadratic_class(
    rho: DensityMatrix,
    drho: ArrayLike,
    coeffs: QuadraticClassCoefficients,
    tol: float = DEFAULT_CLASS_TOL,
    spectrum: Spectrum | None = None,
) -> SLDOperator:
    """L = (2 drho + d_beta rho^+ - d_alpha Pi) / alpha, rho^+ the support inverse."""
    d = check_derivative(drho, rho.dim)
    relation = class_relation_residual(rho.mat, coeffs.alpha, coeffs.beta)
    if relation > 10 * tol:
        raise ClassViolation(
            bound_message("|rho^2 - alpha rho + beta|", relation, 10 * tol), relation, 10 * tol
        )
    spec = spectrum if spectrum is not None else spectral_decompose(rho)
    inverse = support_inverse(spec) if coeffs.d_beta != 0.0 else np.zeros_like(d)
    projector = spec.support_projector
    mat = (2 * d + coeffs.d_beta * inverse - coeffs.d_alpha * projector) / coeffs.alpha
    return sld_from_spectrum(
        mat,
        spec,
        "closed_form",
        rho=rho,
        drho=d,
        diagnostics={
            "alpha": coeffs.alpha,
            "beta": coeffs.beta,
            "d_alpha": coeffs.d_alpha,
            "d_beta": coeffs.d_beta,
            "class_residual": relation,
        },
    )


def bloch_state(r: ArrayLike) -> ComplexMatrix:
    x, y, z = np.asarray(r, dtype=np.float64)
    return (np.eye(2, dtype=np.complex128) + x * PAULI[0] + y * PAULI[1] + z * PAULI[2]) / 2


def bloch_vector(rho: ArrayLike) -> NDArray[np.float64]:
    mat = as_complex_matrix(rho)
    if mat.shape != (2, 2):
        raise InputError(f"Bloch vector needs a 2x2 state, got {mat.shape}")
    return np.array([float(np.real(np.trace(mat @ pauli))) for pauli in PAULI])


def purity(rho: ArrayLike) -> float:
    mat = as_complex_matrix(rho)
    return float(np.real(np.trace(mat @ mat)))


def sld_bloch_qubit(r: ArrayLike, dr: ArrayLike) -> SLDOperator:
    """Mixed: L = 2 drho - dP/(1 - P) sigma_y rho^T sigma_y, P = (1 + |r|^2)/2. Pure: 2 drho."""
    vec = np.asarray(r, dtype=np.float64)
    dvec = np.asarray(dr, dtype=np.float64)
    if vec.shape != (3,) or dvec.shape != (3,):
        raise InvalidBloch("Bloch vector and its derivative must be real 3-vectors")
    length = float(np.linalg.norm(vec))
    if length > 1.0 + 1e-10:
        raise InvalidBloch(f"|r| = {length:.12f} exceeds 1")

    rho = validate_density(bloch_state(vec))
    drho = (dvec[0] * PAULI[0] + dvec[1] * PAULI[1] + dvec[2] * PAULI[2]) / 2
    spectrum = spectral_decompose(rho)
    if length >= 1.0 - PURE_BLOCH_MARGIN:
        mat = 2 * drho
        branch = "pure"
    else:
        p = (1 + length**2) / 2
        dp = float(vec @ dvec)
        mat = 2 * drho - (dp / (1 - p)) * (SIGMA_Y @ rho.mat.T @ SIGMA_Y)
        branch = "mixed"
    return sld_from_spectrum(
        mat, spectrum, "bloch", rho=rho, drho=drho, diagnostics={"branch": branch}
    )
