"""Depolarizing-channel metrology and block-diagonal (direct sum) states."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from sldkit.errors import BoundViolation, ClassViolation, InputError, bound_message
from sldkit.linalg.density import (
    ComplexMatrix,
    DensityMatrix,
    as_complex_matrix,
    dagger,
    frozen,
    hermitize,
    max_abs,
    validate_density,
)
from sldkit.linalg.spectrum import DEFAULT_RANK_TOL, spectral_decompose
from sldkit.sld.operator import SLDOperator, check_derivative, make_sld, sld_from_spectrum
from sldkit.sld.quadratic import (
    DEFAULT_CLASS_TOL,
    PAULI,
    closed_form_coefficients,
    sld_quadratic_class,
)
from sldkit.sld.spectral import sld_spectral

# eta within this distance of 0 or 1 is refused: F_eta diverges at 1 for rank-deficient inputs.
ETA_EDGE = 1e-6
BLOCK_TOL = 1e-12
CONSTANT_COEFF_TOL = 1e-8


class EtaOutOfRange(InputError):
    pass


class EtaBoundary(InputError, BoundViolation):
    pass


class BlockMismatch(InputError, BoundViolation):
    pass


def _check_eta(eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise EtaOutOfRange(f"eta = {eta} lies outside [0, 1]")


def _check_eta_interior(eta: float) -> None:
    _check_eta(eta)
    if not ETA_EDGE < eta < 1.0 - ETA_EDGE:
        raise EtaBoundary(
            f"eta = {eta} is within {ETA_EDGE:.0e} of the channel boundary; "
            "the eta-SLD is undefined or divergent there",
            eta,
            ETA_EDGE,
        )


def depolarize(rho_in: DensityMatrix, eta: float) -> DensityMatrix:
    """eta rho_in + (1 - eta) 1/d."""
    _check_eta(eta)
    d = rho_in.dim
    mixed = np.eye(d, dtype=np.complex128) / d
    return validate_density(eta * rho_in.mat + (1 - eta) * mixed, rho_in.tolerances)


def depolarized_coefficients(
    alpha_in: float, beta_in: float, eta: float, d: int
) -> tuple[float, float]:
    _check_eta(eta)
    alpha = eta * alpha_in + 2 * (1 - eta) / d
    beta = eta**2 * beta_in + eta * (1 - eta) * alpha_in / d + (1 - eta) ** 2 / d**2
    return alpha, beta


def sld_theta_depolarized(
    rho_in: DensityMatrix,
    drho_in: ArrayLike,
    eta: float,
    tol: float = DEFAULT_CLASS_TOL,
) -> SLDOperator:
    """L = 2 d eta / (d eta alpha_in + 2 (1 - eta)) * drho_in for a class input with
    theta-independent coefficients; the SLD belongs to the depolarized state."""
    _check_eta(eta)
    d = rho_in.dim
    drho = check_derivative(drho_in, d)
    coeffs = closed_form_coefficients(spectral_decompose(rho_in), drho, tol)
    if coeffs is None:
        raise ClassViolation("input state does not satisfy rho^2 = alpha rho - beta")
    drift = max(abs(coeffs.d_alpha), abs(coeffs.d_beta))
    if drift > CONSTANT_COEFF_TOL:
        raise ClassViolation(
            bound_message("parameter dependence of alpha_in, beta_in", drift, CONSTANT_COEFF_TOL),
            drift,
            CONSTANT_COEFF_TOL,
        )
    scale = 2 * d * eta / (d * eta * coeffs.alpha + 2 * (1 - eta))
    rho_f = depolarize(rho_in, eta)
    return sld_from_spectrum(
        scale * drho,
        spectral_decompose(rho_f),
        "depolarized",
        rho=rho_f,
        drho=eta * drho,
        diagnostics={"alpha_in": coeffs.alpha, "beta_in": coeffs.beta, "scale": scale},
    )


@dataclass(frozen=True, eq=False)
class DegenerateFamily:
    """rho_in = (1/N) sum_i |psi_i><psi_i| over N orthonormal rows of ``frame``."""

    frame: ComplexMatrix
    frame_deriv: ComplexMatrix

    @property
    def degeneracy(self) -> int:
        return int(self.frame.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frame.shape[1])

    def projectors(self) -> list[ComplexMatrix]:
        return [np.outer(row, row.conj()) for row in self.frame]

    def projector_derivatives(self) -> list[ComplexMatrix]:
        return [
            np.outer(dv, v.conj()) + np.outer(v, dv.conj())
            for v, dv in zip(self.frame, self.frame_deriv, strict=True)
        ]

    def state(self) -> DensityMatrix:
        return validate_density(sum(self.projectors()) / self.degeneracy)

    def derivative(self) -> ComplexMatrix:
        return hermitize(sum(self.projector_derivatives()) / self.degeneracy)


def degenerate_family(frame: ArrayLike, frame_deriv: ArrayLike) -> DegenerateFamily:
    v = np.array(frame, dtype=np.complex128)
    dv = np.array(frame_deriv, dtype=np.complex128)
    if v.ndim != 2 or v.shape != dv.shape:
        raise InputError(f"frame {v.shape} and its derivative {dv.shape} must match")
    n, d = v.shape
    if not 1 <= n < d:
        raise InputError(f"degeneracy N={n} must satisfy 1 <= N < d={d}")
    gram_gap = max_abs(v @ dagger(v) - np.eye(n))
    tangent_gap = max_abs(dv @ dagger(v) + v @ dagger(dv))
    if max(gram_gap, tangent_gap) > 1e-10:
        raise ClassViolation(
            f"frame is not orthonormal along the parameter: |V V^H - 1| = {gram_gap:.3e}, "
            f"|d(V V^H)| = {tangent_gap:.3e}"
        )
    return DegenerateFamily(frame=frozen(v), frame_deriv=frozen(dv))


def sld_degenerate_depolarized(family: DegenerateFamily, eta: float) -> SLDOperator:
    """L = d eta / (d eta + 2 N (1 - eta)) * sum_{i<=N} 2 d(|psi_i><psi_i|)."""
    _check_eta(eta)
    n, d = family.degeneracy, family.dim
    rho_in = family.state()
    premise = max_abs(rho_in.mat @ rho_in.mat - rho_in.mat / n)
    if premise > 1e-10:
        raise ClassViolation(bound_message("|rho_in^2 - rho_in / N|", premise, 1e-10))
    total = sum(2 * p for p in family.projector_derivatives())
    scale = d * eta / (d * eta + 2 * n * (1 - eta))
    rho_f = depolarize(rho_in, eta)
    return sld_from_spectrum(
        scale * np.asarray(total, dtype=np.complex128),
        spectral_decompose(rho_f),
        "degenerate_depolarized",
        rho=rho_f,
        drho=eta * family.derivative(),
        diagnostics={"degeneracy": n, "scale": scale},
    )


def _eta_rates(eigenvalues: NDArray[np.float64], eta: float, d: int) -> NDArray[np.float64]:
    shifted = d * eigenvalues - 1
    return shifted / (eta * shifted + 1)


def sld_eta(rho_in: DensityMatrix, eta: float, rank_tol: float = DEFAULT_RANK_TOL) -> SLDOperator:
    """sum_i (d l_i - 1) / (eta (d l_i - 1) + 1) |l_i><l_i| in the eigenbasis of rho_in."""
    _check_eta_interior(eta)
    d = rho_in.dim
    spectrum = spectral_decompose(rho_in, rank_tol)
    rates = _eta_rates(spectrum.eigenvalues, eta, d)
    mat = spectrum.from_eigenbasis(np.diag(rates).astype(np.complex128))
    rho_f = depolarize(rho_in, eta)
    d_eta = hermitize(rho_in.mat - np.eye(d, dtype=np.complex128) / d)
    return make_sld(
        mat,
        np.eye(d, dtype=np.complex128),
        d,
        "eta",
        rho=rho_f,
        drho=d_eta,
        diagnostics={"eta": eta},
    )


def qfi_eta(eigenvalues: ArrayLike, eta: float) -> float:
    """F_eta = sum_i (d l_i - 1)^2 / (d (eta (d l_i - 1) + 1)), l_i the eigenvalues of rho_in."""
    _check_eta_interior(eta)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    d = lam.shape[0]
    shifted = d * lam - 1
    return float(np.sum(shifted**2 / (d * (eta * shifted + 1))))


@dataclass(frozen=True)
class PauliBlock:
    """rho_i = mu 1 + r . sigma for a 2-dim block; P = Tr rho_i^2."""

    mu: float
    r: tuple[float, float, float]
    purity: float


@dataclass(frozen=True, eq=False)
class BlockDiagonalState:
    """Direct sum of weighted blocks; the block traces sum to one."""

    blocks: tuple[ComplexMatrix, ...]

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(int(b.shape[0]) for b in self.blocks)

    @property
    def dim(self) -> int:
        return sum(self.block_sizes)

    def matrix(self) -> ComplexMatrix:
        return _direct_sum(self.blocks)

    def state(self) -> DensityMatrix:
        return validate_density(self.matrix())

    def purity(self) -> float:
        return float(sum(np.real(np.trace(b @ b)) for b in self.blocks))

    def pauli_data(self) -> list[PauliBlock | None]:
        out: list[PauliBlock | None] = []
        for block in self.blocks:
            if block.shape != (2, 2):
                out.append(None)
                continue
            mu = float(np.real(np.trace(block))) / 2
            x, y, z = (float(np.real(np.trace(block @ s))) / 2 for s in PAULI)
            out.append(
                PauliBlock(mu=mu, r=(x, y, z), purity=float(np.real(np.trace(block @ block))))
            )
        return out


def _direct_sum(blocks: Sequence[ComplexMatrix]) -> ComplexMatrix:
    dim = sum(b.shape[0] for b in blocks)
    out = np.zeros((dim, dim), dtype=np.complex128)
    offset = 0
    for b in blocks:
        stop = offset + b.shape[0]
        out[offset:stop, offset:stop] = b
        offset = stop
    return out


def split_blocks(
    m: ArrayLike, block_sizes: Sequence[int], tol: float = BLOCK_TOL
) -> tuple[ComplexMatrix, ...]:
    """Diagonal blocks of ``m``; BlockMismatch if anything couples two blocks."""
    arr = as_complex_matrix(m)
    if sum(block_sizes) != arr.shape[0]:
        raise BlockMismatch(f"block sizes {list(block_sizes)} do not add up to {arr.shape[0]}")
    coupling = arr.copy()
    blocks: list[ComplexMatrix] = []
    offset = 0
    for size in block_sizes:
        stop = offset + size
        blocks.append(arr[offset:stop, offset:stop].copy())
        coupling[offset:stop, offset:stop] = 0.0
        offset = stop
    leak = max_abs(coupling)
    if leak > tol:
        raise BlockMismatch(bound_message("off-block coupling", leak, tol), leak, tol)
    return tuple(blocks)


def block_diagonal_state(rho: DensityMatrix, block_sizes: Sequence[int]) -> BlockDiagonalState:
    return BlockDiagonalState(blocks=split_blocks(rho.mat, block_sizes))


def _two_dim_block(
    block: ComplexMatrix, dblock: ComplexMatrix, rank_tol: float
) -> tuple[ComplexMatrix, dict[str, Any]]:
    """(d rho_i + xi rho_i^-1 - d mu) / mu, xi = 2 mu d mu - dP/4; xi = 0 on singular blocks."""
    mu = float(np.real(np.trace(block))) / 2
    d_mu = float(np.real(np.trace(dblock))) / 2
    identity = np.eye(2, dtype=np.complex128)
    det = float(np.real(np.linalg.det(block)))
    if det > rank_tol:
        d_purity = 2 * float(np.real(np.trace(block @ dblock)))
        xi = 2 * mu * d_mu - d_purity / 4
        mat = (dblock + xi * np.linalg.inv(block) - d_mu * identity) / mu
    else:
        xi = 0.0
        mat = (dblock - d_mu * identity) / mu
    return mat, {"route": "pauli", "mu": mu, "xi": xi}


def _larger_block(
    block: ComplexMatrix, dblock: ComplexMatrix, rank_tol: float
) -> tuple[ComplexMatrix, dict[str, Any]]:
    """Quadratic-class closed form when the block admits it, spectral otherwise."""
    sub_rho = DensityMatrix(mat=block)
    sub = spectral_decompose(sub_rho, rank_tol)
    try:
        coeffs = closed_form_coefficients(sub, dblock)
        if coeffs is not None:
            sld = sld_quadratic_class(sub_rho, dblock, coeffs, spectrum=sub)
            return np.asarray(sld.mat), {
                "route": "closed_form",
                "alpha": coeffs.alpha,
                "beta": coeffs.beta,
            }
    except ClassViolation:
        pass
    return np.asarray(sld_spectral(sub, dblock, rank_tol).mat), {"route": "spectral"}


def sld_block_diagonal(
    b: BlockDiagonalState,
    dblocks: Sequence[ArrayLike],
    rank_tol: float = DEFAULT_RANK_TOL,
) -> SLDOperator:
    """Direct sum of per-block SLDs.

    2-dim blocks use the Pauli-coefficient form; larger blocks use the quadratic-class
    closed form when their spectrum has two clusters, and the spectral route otherwise.
    """
    if len(dblocks) != len(b.blocks):
        raise BlockMismatch(f"{len(dblocks)} derivative blocks for {len(b.blocks)} blocks")
    pieces: list[ComplexMatrix] = []
    per_block: list[dict[str, Any]] = []
    for block, raw in zip(b.blocks, dblocks, strict=True):
        dblock = check_derivative(raw, block.shape[0])
        weight = float(np.real(np.trace(block)))
        if weight <= rank_tol:
            pieces.append(np.zeros_like(block))
            per_block.append({"route": "empty", "weight": weight})
        elif block.shape == (2, 2):
            mat, info = _two_dim_block(block, dblock, rank_tol)
            pieces.append(mat)
            per_block.append(info)
        else:
            mat, info = _larger_block(block, dblock, rank_tol)
            pieces.append(mat)
            per_block.append(info)

    rho = b.state()
    drho = _direct_sum(
        [check_derivative(raw, blk.shape[0]) for raw, blk in zip(dblocks, b.blocks, strict=True)]
    )
    return sld_from_spectrum(
        _direct_sum(pieces),
        spectral_decompose(rho, rank_tol),
        "block_diagonal",
        rho=rho,
        drho=drho,
        diagnostics={"blocks": per_block},
    )


def block_qfi_contributions(b: BlockDiagonalState, sld: SLDOperator) -> list[float]:
    """Tr(rho_i L_i^2) per block; they sum to the QFI of the whole state."""
    l_blocks = split_blocks(sld.mat, b.block_sizes, tol=np.inf)
    return [
        float(np.real(np.trace(block @ lb @ lb)))
        for block, lb in zip(b.blocks, l_blocks, strict=True)
    ]
