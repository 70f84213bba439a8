"""Unitary parametrizations rho(theta) = U rho_in U^H, worked in the frame of rho_in.

With H = i (dU)^H U the lab-frame derivative is i U [H, rho_in] U^H, so the
effective SLD solves rho_in L + L rho_in = 2i [H, rho_in] and L = U L_eff U^H.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from sldkit.errors import BoundViolation, ClassViolation, InputError, bound_message
from sldkit.linalg.density import (
    ComplexMatrix,
    DensityMatrix,
    anticommutator,
    as_complex_matrix,
    commutator,
    dagger,
    frozen,
    hermitize,
    max_abs,
    validate_density,
)
from sldkit.linalg.spectrum import DEFAULT_RANK_TOL, spectral_decompose, support_inverse
from sldkit.model.dual import Dual
from sldkit.model.evaluate import ParameterPoint, make_env
from sldkit.model.spec import ModelSpec, UnitaryChannelNode, UnitaryModel
from sldkit.qfi import qfi_from_sld
from sldkit.sld.operator import SLDOperator, make_sld, sld_from_spectrum
from sldkit.sld.spectral import sld_spectral

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10
COMMUTING_TOL = 1e-10


class NotUnitary(InputError, BoundViolation):
    pass


@dataclass(frozen=True, eq=False)
class HOperator:
    mat: ComplexMatrix

    @property
    def dim(self) -> int:
        return int(self.mat.shape[0])


def _unitary_env(
    u: UnitaryModel, at: ParameterPoint, which: str | None
) -> tuple[dict[str, Dual], str]:
    name = which or u.parameter
    if name is None:
        if len(at) != 1:
            raise InputError(f"choose the parameter to differentiate among {sorted(at)}")
        name = next(iter(at))
    if name not in at:
        raise InputError(f"no value given for parameter {name!r}")
    return {key: Dual.variable(float(value), key == name) for key, value in at.items()}, name


def h_operator(
    u: UnitaryModel, at: ParameterPoint, which: str | None = None
) -> tuple[HOperator, ComplexMatrix]:
    """H = i (dU/dtheta)^H U at ``at``; also returns U there."""
    env, _ = _unitary_env(u, at, which)
    with np.errstate(all="ignore"):
        out = u.unitary(env)
    value = np.asarray(out.value, dtype=np.complex128)
    deriv = np.asarray(out.deriv, dtype=np.complex128)
    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(deriv))):
        raise NotUnitary(f"unitary has non-finite entries at {dict(at)}")

    gap = max_abs(dagger(value) @ value - np.eye(u.dim))
    if gap > UNITARY_TOL:
        raise NotUnitary(bound_message("max |U^H U - 1|", gap, UNITARY_TOL), gap, UNITARY_TOL)
    raw = 1j * dagger(deriv) @ value
    skew = max_abs(raw - dagger(raw))
    bound = HERMITIAN_TOL * max(1.0, max_abs(raw))
    if skew > bound:
        raise NotUnitary(
            bound_message("non-Hermitian part of i (dU)^H U", skew, bound), skew, bound
        )
    return HOperator(mat=frozen(hermitize(raw))), value


def effective_derivative(rho_in: DensityMatrix, h: HOperator) -> ComplexMatrix:
    """U^H (d rho) U = i [H, rho_in]."""
    return hermitize(1j * commutator(h.mat, rho_in.mat))


def effective_sld(
    rho_in: DensityMatrix, h: HOperator, rank_tol: float = DEFAULT_RANK_TOL
) -> SLDOperator:
    spectrum = spectral_decompose(rho_in, rank_tol)
    d_eff = effective_derivative(rho_in, h)
    if spectrum.support_rank == 1:
        return sld_from_spectrum(
            2 * d_eff, spectrum, "unitary_pure", rho=rho_in, drho=d_eff
        )
    inner = sld_spectral(spectrum, d_eff, rank_tol)
    return sld_from_spectrum(
        inner.mat, spectrum, "unitary", rho=rho_in, drho=d_eff, diagnostics=inner.diagnostics
    )


def effective_sld_commuting(
    rho_in: DensityMatrix, h: HOperator, rank_tol: float = DEFAULT_RANK_TOL
) -> SLDOperator:
    """L_eff = i (H - rho_in H rho_in^+), valid when {H, rho_in^2} = 2 rho_in H rho_in."""
    rho = rho_in.mat
    gap = max_abs(anticommutator(h.mat, rho @ rho) - 2 * rho @ h.mat @ rho)
    if gap > COMMUTING_TOL:
        raise ClassViolation(
            bound_message("|{H, rho^2} - 2 rho H rho|", gap, COMMUTING_TOL), gap, COMMUTING_TOL
        )
    spectrum = spectral_decompose(rho_in, rank_tol)
    mat = 1j * (h.mat - rho @ h.mat @ support_inverse(spectrum))
    return sld_from_spectrum(
        mat,
        spectrum,
        "unitary_commuting",
        rho=rho_in,
        drho=effective_derivative(rho_in, h),
        diagnostics={"condition_gap": gap},
    )


def lab_frame_sld(
    rho_in: DensityMatrix, u: ArrayLike, h: HOperator, rank_tol: float = DEFAULT_RANK_TOL
) -> SLDOperator:
    """U^H L U with L the spectral SLD of U rho_in U^H; agrees with effective_sld."""
    umat = as_complex_matrix(u)
    rho = validate_density(umat @ rho_in.mat @ dagger(umat), rho_in.tolerances)
    drho = hermitize(umat @ effective_derivative(rho_in, h) @ dagger(umat))
    lab = sld_spectral(spectral_decompose(rho, rank_tol), drho, rank_tol)
    spectrum = spectral_decompose(rho_in, rank_tol)
    return make_sld(
        dagger(umat) @ lab.mat @ umat,
        spectrum.support_projector,
        spectrum.support_rank,
        "unitary_lab",
        rho=rho_in,
        drho=effective_derivative(rho_in, h),
    )


def qfi_unitary(rho_in: DensityMatrix, h: HOperator, rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """F = Tr(rho_in L_eff^2)."""
    return qfi_from_sld(rho_in, effective_sld(rho_in, h, rank_tol)).value


@dataclass(frozen=True, eq=False)
class UnitaryFrame:
    rho_in: DensityMatrix
    h: HOperator
    u: ComplexMatrix


def unitary_frame(spec: ModelSpec, at: Mapping[str, float], which: str) -> UnitaryFrame:
    """rho_in, H and U of a unitary_channel model at one parameter point."""
    if not isinstance(spec.node, UnitaryChannelNode):
        raise InputError(f"{spec.name}: model kind {spec.kind!r} has no unitary frame")
    env = make_env(spec, at, which)
    with np.errstate(all="ignore"):
        initial = spec.node.initial.build(env)
    rho_in = validate_density(np.asarray(initial.value, dtype=np.complex128))
    if max_abs(np.asarray(initial.deriv)) > 0.0:
        raise InputError(f"{spec.name}: initial state depends on {which!r}")
    h, u = h_operator(spec.node.unitary_model, at, which)
    return UnitaryFrame(rho_in=rho_in, h=h, u=u)
