"""Eigenbasis routes: the element formula, the commuting shortcut, the eigen-operator
shortcut, and the Kronecker-vectorized linear solve used as an independent check."""

from __future__ import annotations

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike

from sldkit.errors import ClassViolation, SolverError, bound_message
from sldkit.linalg.density import (
    DensityMatrix,
    anticommutator,
    commutator,
    max_abs,
)
from sldkit.linalg.spectrum import DEFAULT_RANK_TOL, Spectrum, spectral_decompose, support_inverse
from sldkit.sld.operator import (
    RankDrift,
    ResidualTooLarge,
    SLDOperator,
    check_derivative,
    kernel_leak,
    sld_from_spectrum,
)

# The kron system is (d^2 x d^2); past this size full-rank states use Bartels-Stewart.
KRON_MAX_DIM = 32
EIGEN_OPERATOR_TOL = 1e-12


class NotCommuting(SolverError):
    pass


def _density_of(spectrum: Spectrum) -> DensityMatrix:
    return DensityMatrix(mat=spectrum.reconstruct())


def sld_spectral(spectrum: Spectrum, drho: ArrayLike, tol: float = 1e-10) -> SLDOperator:
    d = check_derivative(drho, spectrum.dim)
    leak = kernel_leak(d, spectrum)
    if leak > 100 * tol:
        raise RankDrift(
            bound_message("kernel-kernel block of the derivative", leak, 100 * tol), leak, 100 * tol
        )

    p = spectrum.eigenvalues
    denom = p[:, None] + p[None, :]
    d_eig = spectrum.to_eigenbasis(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        l_eig = np.where(denom > spectrum.rank_tol, 2 * d_eig / denom, 0.0)
    mat = spectrum.from_eigenbasis(l_eig)
    return sld_from_spectrum(
        mat,
        spectrum,
        "spectral",
        rho=_density_of(spectrum),
        drho=d,
        diagnostics={"kernel_leak": leak},
    )


def sld_sylvester(
    rho: DensityMatrix,
    drho: ArrayLike,
    abs_tol: float = 1e-10,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> SLDOperator:
    """Solve rho L + L rho = 2 drho without the eigenbasis of ``rho``.

    Row-major vec: vec(rho L) = (rho kron 1) vec(L), vec(L rho) = (1 kron rho^T) vec(L).
    The minimum-norm least-squares solution leaves the singular kernel-kernel
    directions at zero; the support projector is only used to fix the gauge.
    """
    d = check_derivative(drho, rho.dim)
    n = rho.dim
    spectrum = spectral_decompose(rho, rank_tol)

    if n > KRON_MAX_DIM and spectrum.is_full_rank:
        mat = np.asarray(scipy.linalg.solve_sylvester(rho.mat, rho.mat, 2 * d), dtype=np.complex128)
        solver = "bartels_stewart"
    else:
        identity = np.eye(n, dtype=np.complex128)
        system = np.kron(rho.mat, identity) + np.kron(identity, rho.mat.T)
        scale = max(float(np.max(np.abs(system))), 1.0)
        solution, _, rank, _ = scipy.linalg.lstsq(system, 2 * d.reshape(-1), cond=rank_tol / scale)
        mat = np.asarray(solution, dtype=np.complex128).reshape(n, n)
        solver = f"lstsq(rank={int(rank)})"

    out = sld_from_spectrum(
        mat, spectrum, "sylvester", rho=rho, drho=d, diagnostics={"solver": solver}
    )
    residual = float(out.diagnostics["residual"])
    if residual > abs_tol:
        raise ResidualTooLarge(
            bound_message("Sylvester residual |drho - (rho L + L rho)/2|", residual, abs_tol),
            residual,
            abs_tol,
        )
    return out


def sld_commuting(spectrum: Spectrum, drho: ArrayLike, abs_tol: float = 1e-10) -> SLDOperator:
    d = check_derivative(drho, spectrum.dim)
    rho = spectrum.reconstruct()
    gap = max_abs(commutator(rho, d))
    if gap > abs_tol:
        raise NotCommuting(bound_message("max |[rho, drho]|", gap, abs_tol))
    mat = support_inverse(spectrum) @ d
    return sld_from_spectrum(
        mat,
        spectrum,
        "commuting",
        rho=_density_of(spectrum),
        drho=d,
        diagnostics={"commutator": gap},
    )


def eigen_operator_rate(
    rho: DensityMatrix, drho: ArrayLike, tol: float = EIGEN_OPERATOR_TOL
) -> float | None:
    """Return a > 0 with rho drho + drho rho = a drho, or None."""
    d = check_derivative(drho, rho.dim)
    norm_sq = float(np.real(np.vdot(d, d)))
    if norm_sq == 0.0:
        return None
    image = anticommutator(rho.mat, d)
    rate = float(np.real(np.vdot(d, image)) / norm_sq)
    if rate <= 0.0 or max_abs(image - rate * d) > tol:
        return None
    return rate


def sld_eigen_operator(
    rho: DensityMatrix, drho: ArrayLike, rank_tol: float = DEFAULT_RANK_TOL
) -> SLDOperator:
    d = check_derivative(drho, rho.dim)
    rate = eigen_operator_rate(rho, d)
    if rate is None:
        gap = max_abs(anticommutator(rho.mat, d) - d)
        raise ClassViolation(
            "derivative is not an eigen-operator of the anticommutator with rho",
            gap,
            EIGEN_OPERATOR_TOL,
        )
    spectrum = spectral_decompose(rho, rank_tol)
    return sld_from_spectrum(
        (2 / rate) * d, spectrum, "eigen_operator", rho=rho, drho=d, diagnostics={"rate": rate}
    )

