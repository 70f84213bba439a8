"""Quantum Fisher information: from an SLD, in closed form, and as a matrix."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from sldkit.errors import (
    BoundViolation,
    ClassViolation,
    DimensionMismatch,
    SolverError,
    bound_message,
)
from sldkit.linalg.density import DensityMatrix, anticommutator, commutator, max_abs
from sldkit.linalg.spectrum import Spectrum, spectral_decompose, support_inverse
from sldkit.sld.operator import SLDOperator, check_derivative
from sldkit.sld.quadratic import (
    DEFAULT_CLASS_TOL,
    QuadraticClassCoefficients,
    class_relation_residual,
    sld_quadratic_class,
)
from sldkit.sld.spectral import sld_spectral

# Closed forms are checked against the spectral route up to this dimension.
ORACLE_MAX_DIM = 16
NEGATIVE_CLAMP = 1e-12
PSD_TOL = 1e-9
PURITY_MARGIN = 1e-8


class PurityBoundary(SolverError, BoundViolation):
    pass


class NegativeQFI(SolverError, BoundViolation):
    pass


def _clamp_negative(raw: float, what: str) -> float:
    """Round-off below zero within NEGATIVE_CLAMP becomes 0; anything lower is an error."""
    if raw < -NEGATIVE_CLAMP:
        raise NegativeQFI(
            bound_message(f"negative {what}", -raw, NEGATIVE_CLAMP), -raw, NEGATIVE_CLAMP
        )
    return max(raw, 0.0)


@dataclass(frozen=True)
class QFIResult:
    value: float
    method: str
    diagnostics: dict[str, Any] = field(default_factory=dict)


def qfi_from_sld(rho: DensityMatrix, sld: SLDOperator) -> QFIResult:
    """F = Tr(rho L^2)."""
    if sld.dim != rho.dim:
        raise DimensionMismatch(f"SLD is {sld.dim}x{sld.dim}, state is {rho.dim}x{rho.dim}")
    raw = float(np.real(np.trace(rho.mat @ sld.mat @ sld.mat)))
    diagnostics: dict[str, Any] = {
        "trace_rho_L": float(np.real(np.trace(rho.mat @ sld.mat))),
    }
    if raw < 0.0:
        diagnostics["raw"] = raw
    value = _clamp_negative(raw, "Tr(rho L^2)")
    return QFIResult(value=value, method=sld.method, diagnostics=diagnostics)


def _check_class(rho: DensityMatrix, coeffs: QuadraticClassCoefficients, tol: float) -> float:
    relation = class_relation_residual(rho.mat, coeffs.alpha, coeffs.beta)
    if relation > 10 * tol:
        raise ClassViolation(
            bound_message("|rho^2 - alpha rho + beta|", relation, 10 * tol), relation, 10 * tol
        )
    return relation


def _spectral_oracle(spectrum: Spectrum, rho: DensityMatrix, drho: ArrayLike) -> float | None:
    if spectrum.dim > ORACLE_MAX_DIM:
        return None
    try:
        return qfi_from_sld(rho, sld_spectral(spectrum, drho)).value
    except SolverError:
        return None


def qfi_quadratic(
    rho: DensityMatrix,
    drho: ArrayLike,
    coeffs: QuadraticClassCoefficients,
    tol: float = DEFAULT_CLASS_TOL,
    spectrum: Spectrum | None = None,
) -> QFIResult:
    """F = [2 alpha Tr(drho^2) + d_beta^2 Tr(rho^+) - (2M - d) d_alpha d_beta] / alpha^2.

    M is the support rank of ``rho``.
    """
    d = check_derivative(drho, rho.dim)
    relation = _check_class(rho, coeffs, tol)
    spec = spectrum if spectrum is not None else spectral_decompose(rho)
    m, dim = spec.support_rank, spec.dim

    tr_dd = float(np.real(np.trace(d @ d)))
    tr_inv = float(np.real(np.trace(support_inverse(spec)))) if coeffs.d_beta != 0.0 else 0.0
    cross = (2 * m - dim) * coeffs.d_alpha * coeffs.d_beta
    value = (2 * coeffs.alpha * tr_dd + coeffs.d_beta**2 * tr_inv - cross) / coeffs.alpha**2

    diagnostics: dict[str, Any] = {"support_rank": m, "class_residual": relation}
    oracle = _spectral_oracle(spec, rho, d)
    if oracle is not None:
        diagnostics["oracle"] = oracle
        diagnostics["oracle_diff"] = abs(value - oracle)
    if value < 0.0:
        diagnostics["raw"] = value
    value = _clamp_negative(value, "closed-form QFI")
    return QFIResult(value=value, method="closed_form", diagnostics=diagnostics)


def qfi_lower_bound(coeffs: QuadraticClassCoefficients, support_rank: int) -> float:
    """[(M d_beta)^2 - (2M - d) d_alpha d_beta] / alpha^2, from Tr(rho^+) >= M^2."""
    m = support_rank
    cross = (2 * m - coeffs.dim) * coeffs.d_alpha * coeffs.d_beta
    return ((m * coeffs.d_beta) ** 2 - cross) / coeffs.alpha**2


@dataclass(frozen=True, eq=False)
class QFIMatrix:
    params: tuple[str, ...]
    mat: NDArray[np.float64]
    slds: tuple[SLDOperator, ...] = ()
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.mat)[0])

    @property
    def is_psd(self) -> bool:
        return self.min_eigenvalue >= -PSD_TOL

    def entry(self, a: str, b: str) -> float:
        return float(self.mat[self.params.index(a), self.params.index(b)])


def _matrix_diagnostics(
    rho: DensityMatrix, slds: Sequence[SLDOperator], raw: NDArray[np.float64]
) -> dict[str, Any]:
    incompatibility = 0.0
    for i, a in enumerate(slds):
        for b in slds[i + 1 :]:
            value = abs(complex(np.trace(rho.mat @ commutator(a.mat, b.mat))))
            incompatibility = max(incompatibility, value)
    return {
        "asymmetry": max_abs(raw - raw.T),
        "max_commutator_expectation": incompatibility,
    }


def _finish(
    params: tuple[str, ...],
    raw: NDArray[np.float64],
    slds: Sequence[SLDOperator],
    diagnostics: dict[str, Any],
) -> QFIMatrix:
    mat = (raw + raw.T) / 2
    out = QFIMatrix(params=params, mat=mat, slds=tuple(slds), diagnostics=diagnostics)
    diagnostics["min_eigenvalue"] = out.min_eigenvalue
    diagnostics["psd"] = out.is_psd
    return out


def _default_params(count: int, params: Sequence[str] | None) -> tuple[str, ...]:
    names = tuple(params) if params is not None else tuple(f"theta{i}" for i in range(count))
    if len(names) != count:
        raise DimensionMismatch(f"{len(names)} parameter names for {count} derivatives")
    return names


def qfi_matrix(
    rho: DensityMatrix, slds: Sequence[SLDOperator], params: Sequence[str] | None = None
) -> QFIMatrix:
    """F_ij = Tr(rho {L_i, L_j}) / 2."""
    names = _default_params(len(slds), params)
    for sld in slds:
        if sld.dim != rho.dim:
            raise DimensionMismatch(f"SLD is {sld.dim}x{sld.dim}, state is {rho.dim}x{rho.dim}")
    k = len(slds)
    raw = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            product = anticommutator(slds[i].mat, slds[j].mat)
            raw[i, j] = float(np.real(np.trace(rho.mat @ product))) / 2
    return _finish(names, raw, slds, _matrix_diagnostics(rho, slds, raw))


def qfi_matrix_quadratic(
    rho: DensityMatrix,
    drhos: Sequence[ArrayLike],
    coeffs: Sequence[QuadraticClassCoefficients],
    params: Sequence[str] | None = None,
    tol: float = DEFAULT_CLASS_TOL,
) -> QFIMatrix:
    """F_ij = [alpha Tr{d_i rho, d_j rho} + d_i beta d_j beta Tr(rho^+)
    - (M - d/2)(d_i alpha d_j beta + d_j alpha d_i beta)] / alpha^2.

    ``coeffs`` carries one (d_alpha, d_beta) pair per parameter; alpha and beta must agree.
    """
    if len(drhos) != len(coeffs):
        raise DimensionMismatch(f"{len(drhos)} derivatives but {len(coeffs)} coefficient sets")
    names = _default_params(len(drhos), params)
    base = coeffs[0]
    for c in coeffs[1:]:
        if abs(c.alpha - base.alpha) > tol or abs(c.beta - base.beta) > tol:
            raise ClassViolation("coefficient sets describe different states")
    relation = _check_class(rho, base, tol)
    spec = spectral_decompose(rho)
    m, dim = spec.support_rank, spec.dim
    ds = [check_derivative(drho, rho.dim) for drho in drhos]
    tr_inv = float(np.real(np.trace(support_inverse(spec))))

    k = len(ds)
    raw = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            sym = float(np.real(np.trace(anticommutator(ds[i], ds[j]))))
            cross = (m - dim / 2) * (
                coeffs[i].d_alpha * coeffs[j].d_beta + coeffs[j].d_alpha * coeffs[i].d_beta
            )
            raw[i, j] = (
                base.alpha * sym + coeffs[i].d_beta * coeffs[j].d_beta * tr_inv - cross
            ) / base.alpha**2

    slds = [
        sld_quadratic_class(rho, d, c, tol, spectrum=spec) for d, c in zip(ds, coeffs, strict=True)
    ]
    diagnostics = _matrix_diagnostics(rho, slds, raw)
    diagnostics["class_residual"] = relation
    return _finish(names, raw, slds, diagnostics)


def qfi_matrix_two_level(
    rho: DensityMatrix, drhos: Sequence[ArrayLike], params: Sequence[str] | None = None
) -> QFIMatrix:
    """F_ij = Tr{d_i rho, d_j rho} + d_i P d_j P / (2 (1 - P)) for a mixed qubit."""
    if rho.dim != 2:
        raise DimensionMismatch(f"two-level form needs a qubit, got dimension {rho.dim}")
    names = _default_params(len(drhos), params)
    p = rho.purity()
    if p >= 1.0 - PURITY_MARGIN:
        raise PurityBoundary(
            bound_message("purity", p, 1.0 - PURITY_MARGIN) + "; use the SLD route for pure states",
            p,
            1.0 - PURITY_MARGIN,
        )
    ds = [check_derivative(drho, 2) for drho in drhos]
    dp = [2 * float(np.real(np.trace(rho.mat @ d))) for d in ds]
    k = len(ds)
    raw = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            sym = float(np.real(np.trace(anticommutator(ds[i], ds[j]))))
            raw[i, j] = sym + dp[i] * dp[j] / (2 * (1 - p))
    return _finish(names, raw, (), {"purity": p, "asymmetry": max_abs(raw - raw.T)})
