from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg
import scipy.stats

from sldkit.channels import (
    BlockMismatch,
    EtaBoundary,
    EtaOutOfRange,
    block_diagonal_state,
    block_qfi_contributions,
    degenerate_family,
    depolarize,
    depolarized_coefficients,
    qfi_eta,
    sld_block_diagonal,
    sld_degenerate_depolarized,
    sld_eta,
    sld_theta_depolarized,
    split_blocks,
)
from sldkit.errors import ClassViolation, InputError
from sldkit.linalg.density import validate_density
from sldkit.linalg.spectrum import spectral_decompose
from sldkit.model.evaluate import eval_derivative, eval_model
from sldkit.model.registry import ModelRegistry
from sldkit.qfi import qfi_from_sld
from sldkit.sld.operator import compare_slds
from sldkit.sld.quadratic import bloch_state, detect_quadratic_class
from sldkit.sld.spectral import sld_spectral

KET0 = validate_density(np.diag([1.0, 0.0]))
_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def test_depolarized_coefficients_for_pure_qubit() -> None:
    alpha, beta = depolarized_coefficients(1.0, 0.0, 0.8, 2)
    assert alpha == pytest.approx(1.0, abs=1e-12)
    assert beta == pytest.approx(0.09, abs=1e-12)
    detected = detect_quadratic_class(spectral_decompose(depolarize(KET0, 0.8)))
    assert detected is not None
    assert (detected.alpha, detected.beta) == pytest.approx((alpha, beta), abs=1e-12)


@pytest.mark.parametrize("eta", np.linspace(0.1, 0.9, 9).tolist())
def test_depolarized_coefficients_on_random_inputs(eta, random_state) -> None:
    for _ in range(5):
        rho_in = random_state(2)
        coeffs_in = detect_quadratic_class(spectral_decompose(rho_in))
        assert coeffs_in is not None
        alpha, beta = depolarized_coefficients(coeffs_in.alpha, coeffs_in.beta, eta, 2)
        out = detect_quadratic_class(spectral_decompose(depolarize(rho_in, eta)))
        assert out is not None
        assert (out.alpha, out.beta) == pytest.approx((alpha, beta), abs=1e-12)


@pytest.mark.parametrize("eta", np.linspace(0.1, 0.9, 9).tolist())
@pytest.mark.parametrize("dim", [2, 3, 4])
def test_depolarized_state_commutes_with_its_eta_derivative(eta, dim, random_state) -> None:
    for _ in range(5):
        rho_in = random_state(dim)
        rho_f = depolarize(rho_in, eta).mat
        d_eta = rho_in.mat - np.eye(dim) / dim
        assert np.max(np.abs(rho_f @ d_eta - d_eta @ rho_f)) <= 1e-12


@pytest.mark.parametrize("eta", np.linspace(0.1, 0.9, 9).tolist())
def test_eta_qfi_for_pure_qubit(eta) -> None:
    expected = 1 / (1 - eta**2)
    assert qfi_eta([1.0, 0.0], eta) == pytest.approx(expected, abs=1e-10)
    rho_f = depolarize(KET0, eta)
    sld = sld_eta(KET0, eta)
    assert sld.diagnostics["residual"] <= 1e-12
    assert qfi_from_sld(rho_f, sld).value == pytest.approx(expected, abs=1e-10)
    # The eigenbasis of rho_f does not move with eta: sum (dp)^2 / p.
    p = eta * np.array([1.0, 0.0]) + (1 - eta) / 2
    dp = np.array([1.0, 0.0]) - 0.5
    assert float(np.sum(dp**2 / p)) == pytest.approx(expected, abs=1e-10)


def test_eta_qfi_at_one_half_is_four_thirds() -> None:
    value = qfi_eta([1.0, 0.0], 0.5)
    assert value == pytest.approx(4 / 3, abs=1e-12)
    assert abs(value - 4 / 9) > 0.5


def test_eta_sld_on_mixed_input_matches_spectral(random_state) -> None:
    rho_in = random_state(3)
    eta = 0.6
    rho_f = depolarize(rho_in, eta)
    d_eta = rho_in.mat - np.eye(3) / 3
    spectral = sld_spectral(spectral_decompose(rho_f), d_eta)
    assert compare_slds(sld_eta(rho_in, eta), spectral) <= 1e-10
    eigenvalues = np.linalg.eigvalsh(rho_in.mat)
    assert qfi_eta(eigenvalues, eta) == pytest.approx(qfi_from_sld(rho_f, spectral).value)


def test_eta_boundaries() -> None:
    for eta in (0.0, 1.0, 1.0 - 1e-8):
        with pytest.raises(EtaBoundary):
            sld_eta(KET0, eta)
    with pytest.raises(EtaOutOfRange):
        depolarize(KET0, 1.5)
    with pytest.raises(EtaOutOfRange):
        qfi_eta([1.0, 0.0], -0.1)


def test_theta_sld_behind_depolarizing_channel(models_dir) -> None:
    spec = ModelRegistry(models_dir).resolve("depolarized_rotation")
    inner = ModelRegistry(models_dir).resolve("pure_qubit")
    at = {"theta": 0.4}
    rho_in = eval_model(inner, at)
    drho_in = eval_derivative(inner, at, "theta")
    sld = sld_theta_depolarized(rho_in, drho_in, 0.8)
    assert sld.diagnostics["scale"] == pytest.approx(1.6)
    assert np.max(np.abs(sld.mat - 1.6 * drho_in)) <= 1e-12

    rho_f = eval_model(spec, at)
    drho_f = eval_derivative(spec, at, "theta")
    assert np.max(np.abs(drho_f - 0.8 * drho_in)) <= 1e-12
    spectral = sld_spectral(spectral_decompose(rho_f), drho_f)
    assert compare_slds(sld, spectral) <= 1e-10
    assert qfi_from_sld(rho_f, sld).value == pytest.approx(2.56, abs=1e-10)


def test_theta_sld_refuses_drifting_coefficients() -> None:
    rho_in = validate_density(bloch_state([0.0, 0.0, 0.5]))
    drho_in = np.diag([0.5, -0.5])
    with pytest.raises(ClassViolation):
        sld_theta_depolarized(rho_in, drho_in, 0.7)


def _rotating_frame(rng: np.random.Generator, dim: int, n: int):
    q = scipy.stats.unitary_group.rvs(dim, random_state=rng)
    k = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    k = (k - k.conj().T) / 2
    moved = q @ k
    return q[:n], moved[:n]


@pytest.mark.parametrize(("dim", "n"), [(3, 1), (4, 2), (5, 3)])
def test_degenerate_family_behind_channel(dim, n, rng) -> None:
    frame, frame_deriv = _rotating_frame(rng, dim, n)
    family = degenerate_family(frame, frame_deriv)
    eta = 0.7
    sld = sld_degenerate_depolarized(family, eta)
    rho_f = depolarize(family.state(), eta)
    spectral = sld_spectral(spectral_decompose(rho_f), eta * family.derivative())
    assert sld.diagnostics["residual"] <= 1e-10
    assert compare_slds(sld, spectral) <= 1e-9
    expected_scale = dim * eta / (dim * eta + 2 * n * (1 - eta))
    assert sld.diagnostics["scale"] == pytest.approx(expected_scale)


def test_degenerate_family_validation(rng) -> None:
    frame, frame_deriv = _rotating_frame(rng, 3, 1)
    with pytest.raises(ClassViolation):
        degenerate_family(2 * frame, frame_deriv)
    with pytest.raises(ClassViolation):
        degenerate_family(frame, frame_deriv + frame)
    full, full_deriv = _rotating_frame(rng, 3, 3)
    with pytest.raises(InputError):
        degenerate_family(full, full_deriv)


def _random_blocks(random_state, random_hermitian, rng, sizes):
    weights = rng.uniform(0.2, 1.0, size=len(sizes))
    weights /= weights.sum()
    blocks = [w * random_state(s).mat for w, s in zip(weights, sizes, strict=True)]
    dblocks = [random_hermitian(s, traceless=False) for s in sizes]
    shift = sum(np.real(np.trace(d)) for d in dblocks) / sum(sizes)
    dblocks = [d - shift * np.eye(d.shape[0]) for d in dblocks]
    return blocks, dblocks


@pytest.mark.parametrize("sizes", [(2, 2), (2, 2, 2), (2, 3), (1, 2)])
def test_block_diagonal_sld_is_direct_sum(sizes, random_state, random_hermitian, rng) -> None:
    for _ in range(10):
        blocks, dblocks = _random_blocks(random_state, random_hermitian, rng, sizes)
        rho = validate_density(scipy.linalg.block_diag(*blocks))
        state = block_diagonal_state(rho, sizes)
        sld = sld_block_diagonal(state, dblocks)
        drho = scipy.linalg.block_diag(*dblocks)
        spectral = sld_spectral(spectral_decompose(rho), drho)
        assert sld.diagnostics["residual"] <= 1e-10
        assert compare_slds(sld, spectral) <= 1e-9

        total = qfi_from_sld(rho, spectral).value
        parts = block_qfi_contributions(state, sld)
        assert sum(parts) == pytest.approx(total, abs=1e-9 * max(1.0, total))
        assert all(part >= -1e-12 for part in parts)


def test_block_routes_and_pauli_data(random_state, random_hermitian, rng) -> None:
    blocks, dblocks = _random_blocks(random_state, random_hermitian, rng, (2, 3))
    state = block_diagonal_state(validate_density(scipy.linalg.block_diag(*blocks)), (2, 3))
    routes = [info["route"] for info in sld_block_diagonal(state, dblocks).diagnostics["blocks"]]
    assert routes == ["pauli", "spectral"]

    pauli = state.pauli_data()
    assert pauli[1] is None
    first = pauli[0]
    assert first is not None
    assert first.mu == pytest.approx(np.real(np.trace(blocks[0])) / 2)
    assert first.purity == pytest.approx(2 * first.mu**2 + 2 * sum(x**2 for x in first.r))
    assert state.purity() == pytest.approx(np.real(np.trace(state.matrix() @ state.matrix())))


def test_block_pauli_form_xi(random_state, random_hermitian, rng) -> None:
    blocks, dblocks = _random_blocks(random_state, random_hermitian, rng, (2, 2))
    state = block_diagonal_state(validate_density(scipy.linalg.block_diag(*blocks)), (2, 2))
    info = sld_block_diagonal(state, dblocks).diagnostics["blocks"][0]
    block, dblock = blocks[0], dblocks[0]
    mu = np.real(np.trace(block)) / 2
    d_mu = np.real(np.trace(dblock)) / 2
    r = np.array([np.real(np.trace(block @ s)) / 2 for s in _PAULI])
    dr = np.array([np.real(np.trace(dblock @ s)) / 2 for s in _PAULI])
    assert info["mu"] == pytest.approx(mu)
    assert info["xi"] == pytest.approx(mu * d_mu - r @ dr, abs=1e-12)


def test_empty_block_is_skipped(random_state) -> None:
    inner = random_state(2).mat
    rho = validate_density(scipy.linalg.block_diag(inner, np.zeros((2, 2))))
    state = block_diagonal_state(rho, (2, 2))
    drho = np.array([[0.3, 0.1j], [-0.1j, -0.3]])
    sld = sld_block_diagonal(state, [drho, np.zeros((2, 2))])
    assert sld.diagnostics["blocks"][1]["route"] == "empty"
    assert sld.diagnostics["residual"] <= 1e-10


def test_block_mismatch() -> None:
    coupled = np.full((4, 4), 0.1) + np.eye(4) * 0.15
    with pytest.raises(BlockMismatch):
        split_blocks(coupled, (2, 2))
    with pytest.raises(BlockMismatch):
        split_blocks(np.eye(4) / 4, (2, 1))
    state = block_diagonal_state(validate_density(np.eye(4) / 4), (2, 2))
    with pytest.raises(BlockMismatch):
        sld_block_diagonal(state, [np.zeros((2, 2))])


def test_two_block_model(models_dir) -> None:
    spec = ModelRegistry(models_dir).resolve("two_block")
    at = {"theta": 0.3}
    rho = eval_model(spec, at)
    drho = eval_derivative(spec, at, "theta")
    state = block_diagonal_state(rho, spec.block_sizes)
    dblocks = split_blocks(drho, spec.block_sizes)
    sld = sld_block_diagonal(state, dblocks)
    spectral = sld_spectral(spectral_decompose(rho), drho)
    assert compare_slds(sld, spectral) <= 1e-9


def test_three_dim_two_cluster_block_uses_closed_form(random_state, rng) -> None:
    frame = scipy.stats.unitary_group.rvs(3, random_state=rng)
    block = 0.6 * frame @ np.diag([0.4, 0.4, 0.2]) @ frame.conj().T
    generator = np.array([[0.0, 0.3, 0.1j], [0.3, 0.2, -0.2], [-0.1j, -0.2, -0.1]])
    # Cluster rates plus a rotation keep the two clusters intact.
    dblock = frame @ np.diag([0.05, 0.05, 0.1]) @ frame.conj().T
    dblock = dblock + 1j * (generator @ block - block @ generator)
    small = 0.4 * random_state(2).mat
    dsmall = np.diag([-0.1, -0.1]).astype(complex)
    rho = validate_density(scipy.linalg.block_diag(small, block))
    state = block_diagonal_state(rho, (2, 3))

    sld = sld_block_diagonal(state, [dsmall, dblock])
    info = sld.diagnostics["blocks"]
    assert [entry["route"] for entry in info] == ["pauli", "closed_form"]
    assert info[1]["alpha"] == pytest.approx(0.6 * 0.6, abs=1e-10)
    assert info[1]["beta"] == pytest.approx(0.24 * 0.12, abs=1e-10)
    assert sld.diagnostics["residual"] <= 1e-10
    spectral = sld_spectral(spectral_decompose(rho), scipy.linalg.block_diag(dsmall, dblock))
    assert compare_slds(sld, spectral) <= 1e-9


def test_block_falls_back_to_spectral_when_clusters_split(rng) -> None:
    frame = scipy.stats.unitary_group.rvs(3, random_state=rng)
    block = frame @ np.diag([0.35, 0.35, 0.3]) @ frame.conj().T
    # Different rates inside the degenerate pair break the quadratic class.
    dblock = frame @ np.diag([0.1, -0.1, 0.0]) @ frame.conj().T
    state = block_diagonal_state(validate_density(block), (3,))
    sld = sld_block_diagonal(state, [dblock])
    assert sld.diagnostics["blocks"][0]["route"] == "spectral"
    assert sld.diagnostics["residual"] <= 1e-10
