from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        __str__ = str.__str__
        __format__ = str.__format__

from sldkit.errors import BoundViolation, DimensionMismatch, InputError, SolverError, bound_message
from sldkit.linalg.density import (
    ComplexMatrix,
    DensityMatrix,
    anticommutator,
    as_complex_matrix,
    dagger,
    frozen,
    hermitize,
    max_abs,
)
from sldkit.linalg.spectrum import Spectrum

# Hermiticity accepted on an incoming derivative before it is symmetrized.
DERIVATIVE_HERM_TOL = 1e-8


class Gauge(StrEnum):
    KERNEL_BLOCK_ZERO = "kernel_zero"


class RankDrift(SolverError, BoundViolation):
    pass


class ResidualTooLarge(SolverError, BoundViolation):
    pass


@dataclass(frozen=True, eq=False)
class SLDOperator:
    """Hermitian L with the kernel-kernel block fixed by ``gauge``."""

    mat: ComplexMatrix
    support_projector: ComplexMatrix
    support_rank: int
    method: str
    gauge: Gauge = Gauge.KERNEL_BLOCK_ZERO
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.mat.shape[0])


def check_derivative(drho: ArrayLike, dim: int) -> ComplexMatrix:
    arr = as_complex_matrix(drho)
    if arr.shape[0] != dim:
        raise DimensionMismatch(
            f"derivative is {arr.shape[0]}x{arr.shape[0]}, state is {dim}x{dim}"
        )
    err = max_abs(arr - dagger(arr))
    if err > DERIVATIVE_HERM_TOL:
        raise InputError(bound_message("derivative max |m - m^H|", err, DERIVATIVE_HERM_TOL))
    return hermitize(arr)


def apply_kernel_gauge(mat: ComplexMatrix, support_projector: ComplexMatrix) -> ComplexMatrix:
    kernel = np.eye(mat.shape[0], dtype=np.complex128) - support_projector
    return hermitize(mat - kernel @ mat @ kernel)


def defining_residual(rho: ComplexMatrix, drho: ComplexMatrix, mat: ComplexMatrix) -> float:
    """max |drho - (rho L + L rho)/2|."""
    return max_abs(drho - anticommutator(rho, mat) / 2)


def make_sld(
    mat: ComplexMatrix,
    support_projector: ComplexMatrix,
    support_rank: int,
    method: str,
    rho: DensityMatrix | None = None,
    drho: ComplexMatrix | None = None,
    diagnostics: dict[str, Any] | None = None,
) -> SLDOperator:
    gauged = apply_kernel_gauge(mat, support_projector)
    extra = dict(diagnostics or {})
    if rho is not None and drho is not None:
        extra.setdefault("residual", defining_residual(rho.mat, drho, gauged))
        extra.setdefault("trace_rho_L", float(np.real(np.trace(rho.mat @ gauged))))
    return SLDOperator(
        mat=frozen(gauged),
        support_projector=support_projector,
        support_rank=support_rank,
        method=method,
        diagnostics=extra,
    )


def sld_from_spectrum(
    mat: ComplexMatrix,
    spectrum: Spectrum,
    method: str,
    rho: DensityMatrix | None = None,
    drho: ComplexMatrix | None = None,
    diagnostics: dict[str, Any] | None = None,
) -> SLDOperator:
    return make_sld(
        mat,
        spectrum.support_projector,
        spectrum.support_rank,
        method,
        rho=rho,
        drho=drho,
        diagnostics=diagnostics,
    )


def kernel_leak(drho: ComplexMatrix, spectrum: Spectrum) -> float:
    kernel = spectrum.kernel_projector
    return max_abs(kernel @ drho @ kernel)


def compare_slds(
    a: SLDOperator, b: SLDOperator, support_projector: ComplexMatrix | None = None
) -> float:
    """Gauge-blind distance: support-support plus both cross blocks, max-norm each."""
    if a.mat.shape != b.mat.shape:
        raise DimensionMismatch(f"cannot compare {a.mat.shape} with {b.mat.shape}")
    proj = a.support_projector if support_projector is None else support_projector
    if proj.shape != a.mat.shape:
        raise DimensionMismatch(f"support projector {proj.shape} does not match {a.mat.shape}")
    kernel = np.eye(a.dim, dtype=np.complex128) - proj
    diff = a.mat - b.mat
    return (
        max_abs(proj @ diff @ proj)
        + max_abs(proj @ diff @ kernel)
        + max_abs(kernel @ diff @ proj)
    )
