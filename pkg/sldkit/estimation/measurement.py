"""Measurements built from an SLD and the classical Fisher information they carry."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from sldkit.errors import BoundViolation, InputError, SolverError, bound_message
from sldkit.linalg.density import (
    ComplexMatrix,
    DensityMatrix,
    as_complex_matrix,
    dagger,
    frozen,
    hermitize,
    max_abs,
)
from sldkit.linalg.spectrum import EigenFailure
from sldkit.model.evaluate import ParameterPoint, eval_derivative, eval_model
from sldkit.model.spec import ModelSpec
from sldkit.sld.operator import SLDOperator, check_derivative

POVM_TOL = 1e-10
CLUSTER_TOL = 1e-9
SINGULAR_P = 1e-12


class InvalidPOVM(InputError, BoundViolation):
    pass


class SingularOutcome(SolverError, BoundViolation):
    pass


@dataclass(frozen=True, eq=False)
class POVM:
    effects: tuple[ComplexMatrix, ...]

    @property
    def dim(self) -> int:
        return int(self.effects[0].shape[0])

    def __len__(self) -> int:
        return len(self.effects)


def make_povm(effects: Sequence[ArrayLike], tol: float = POVM_TOL) -> POVM:
    if not effects:
        raise InvalidPOVM("a POVM needs at least one effect")
    mats = [as_complex_matrix(e) for e in effects]
    dim = mats[0].shape[0]
    total = np.zeros((dim, dim), dtype=np.complex128)
    for idx, m in enumerate(mats):
        if m.shape != (dim, dim):
            raise InvalidPOVM(f"effect {idx} is {m.shape}, expected {(dim, dim)}")
        skew = max_abs(m - dagger(m))
        if skew > tol:
            raise InvalidPOVM(bound_message(f"effect {idx} |E - E^H|", skew, tol), skew, tol)
        lowest = float(np.linalg.eigvalsh(hermitize(m))[0])
        if lowest < -tol:
            raise InvalidPOVM(
                f"effect {idx} has eigenvalue {lowest:.3e} below -{tol:.0e}", lowest, tol
            )
        total += m
    gap = max_abs(total - np.eye(dim))
    if gap > tol:
        raise InvalidPOVM(bound_message("|sum E - 1|", gap, tol), gap, tol)
    return POVM(effects=tuple(frozen(hermitize(m)) for m in mats))


def optimal_measurement(sld: SLDOperator, tol: float = CLUSTER_TOL) -> POVM:
    """Projectors onto the eigenspaces of L; eigenvalues within ``tol`` share one projector."""
    try:
        values, vectors = np.linalg.eigh(sld.mat)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(f"SLD eigensolver did not converge: {exc}") from exc
    effects: list[ComplexMatrix] = []
    start = 0
    for idx in range(1, len(values) + 1):
        if idx == len(values) or values[idx] - values[start] > tol:
            block = vectors[:, start:idx]
            effects.append(block @ dagger(block))
            start = idx
    return make_povm(effects)


def outcome_distribution(
    povm: POVM, rho: DensityMatrix, drho: ArrayLike | None = None
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """p_x = Tr(E_x rho) and, if ``drho`` is given, dp_x = Tr(E_x drho)."""
    if povm.dim != rho.dim:
        raise InputError(f"POVM acts on dimension {povm.dim}, state has {rho.dim}")
    p = np.array([float(np.real(np.trace(e @ rho.mat))) for e in povm.effects])
    if drho is None:
        return p, np.zeros_like(p)
    d = check_derivative(drho, rho.dim)
    dp = np.array([float(np.real(np.trace(e @ d))) for e in povm.effects])
    return p, dp


def classical_fisher_from_state(povm: POVM, rho: DensityMatrix, drho: ArrayLike) -> float:
    """sum_x dp_x^2 / p_x; outcomes with p_x and dp_x both negligible contribute nothing."""
    p, dp = outcome_distribution(povm, rho, drho)
    total = 0.0
    for idx, (px, dpx) in enumerate(zip(p, dp, strict=True)):
        if px <= SINGULAR_P:
            if abs(dpx) <= SINGULAR_P:
                continue
            raise SingularOutcome(
                f"outcome {idx} has p = {px:.3e} but dp = {dpx:.3e}; "
                "the Fisher information diverges",
                px,
                SINGULAR_P,
            )
        total += dpx**2 / px
    return total


def classical_fisher(povm: POVM, spec: ModelSpec, at: ParameterPoint, which: str) -> float:
    rho = eval_model(spec, at)
    drho = eval_derivative(spec, at, which)
    return classical_fisher_from_state(povm, rho, drho)
