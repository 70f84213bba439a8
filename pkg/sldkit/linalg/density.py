from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, Field

from sldkit.errors import BoundViolation, DimensionMismatch, InputError, bound_message

ComplexMatrix = NDArray[np.complex128]


class DensityTolerances(BaseModel):
    herm_tol: float = Field(default=1e-10, ge=0.0)
    psd_tol: float = Field(default=1e-10, ge=0.0)
    trace_tol: float = Field(default=1e-10, ge=0.0)


class InvalidDensity(InputError, BoundViolation):
    pass


class NotHermitian(InvalidDensity):
    pass


class NotPositive(InvalidDensity):
    pass


class TraceNotOne(InvalidDensity):
    pass


def as_complex_matrix(m: ArrayLike) -> ComplexMatrix:
    """Copy ``m`` into a square, finite complex128 array."""
    arr = np.array(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"Expected a square matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise DimensionMismatch("Matrix must have positive dimension")
    if not np.all(np.isfinite(arr)):
        raise InputError("Matrix has non-finite entries")
    return arr


def frozen(arr: NDArray[np.generic]) -> NDArray[np.generic]:
    arr.setflags(write=False)
    return arr


def dagger(m: ComplexMatrix) -> ComplexMatrix:
    return m.conj().T


def hermitize(m: ComplexMatrix) -> ComplexMatrix:
    return (m + m.conj().T) / 2


def max_abs(m: ArrayLike) -> float:
    arr = np.asarray(m)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


def commutator(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    return a @ b - b @ a


def anticommutator(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    return a @ b + b @ a


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated Hermitian, positive-semidefinite, unit-trace matrix."""

    mat: ComplexMatrix
    tolerances: DensityTolerances = field(default_factory=DensityTolerances)

    @property
    def dim(self) -> int:
        return int(self.mat.shape[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))


def validate_density(
    m: ArrayLike, tolerances: DensityTolerances | None = None
) -> DensityMatrix:
    tols = tolerances or DensityTolerances()
    arr = as_complex_matrix(m)

    herm_err = max_abs(arr - dagger(arr))
    if herm_err > tols.herm_tol:
        raise NotHermitian(
            bound_message("max |m - m^H|", herm_err, tols.herm_tol), herm_err, tols.herm_tol
        )
    arr = hermitize(arr)

    eigenvalues = np.linalg.eigvalsh(arr)
    lowest = float(eigenvalues[0])
    if lowest < -tols.psd_tol:
        raise NotPositive(
            f"smallest eigenvalue {lowest:.3e} is below -psd_tol={tols.psd_tol:.1e}",
            lowest,
            tols.psd_tol,
        )

    trace = float(np.real(np.trace(arr)))
    if abs(trace - 1.0) > tols.trace_tol:
        raise TraceNotOne(
            bound_message("|Tr(m) - 1|", abs(trace - 1.0), tols.trace_tol),
            trace,
            tols.trace_tol,
        )

    return DensityMatrix(mat=frozen(arr), tolerances=tols)
