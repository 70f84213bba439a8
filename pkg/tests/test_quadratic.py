from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg
import scipy.stats

from sldkit.errors import ClassViolation
from sldkit.linalg.density import validate_density
from sldkit.linalg.spectrum import spectral_decompose
from sldkit.qfi import qfi_from_sld, qfi_lower_bound, qfi_quadratic
from sldkit.sld.operator import compare_slds
from sldkit.sld.quadratic import (
    InvalidBloch,
    bloch_state,
    bloch_vector,
    closed_form_coefficients,
    detect_quadratic_class,
    purity,
    sld_bloch_qubit,
    sld_quadratic_class,
)
from sldkit.sld.spectral import sld_spectral


def _two_level_family(rng: np.random.Generator, dim: int, k: int, p_plus: float, dp_plus: float):
    """rho = p+ P + p- (1 - P) with rank-k P, moving both eigenvalues and the frame."""
    u = scipy.stats.unitary_group.rvs(dim, random_state=rng)
    proj = u[:, :k] @ u[:, :k].conj().T
    rest = np.eye(dim) - proj
    p_minus = (1 - k * p_plus) / (dim - k)
    dp_minus = -k * dp_plus / (dim - k)
    rho = validate_density(p_plus * proj + p_minus * rest)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    g = (g + g.conj().T) / 2
    drho = dp_plus * proj + dp_minus * rest + 1j * (g @ rho.mat - rho.mat @ g)
    return rho, drho


def test_quadratic_closed_form_matches_spectral_on_qubits(random_state, random_hermitian) -> None:
    for _ in range(200):
        rho = random_state(2)
        drho = random_hermitian(2)
        spectrum = spectral_decompose(rho)
        coeffs = closed_form_coefficients(spectrum, drho)
        assert coeffs is not None
        oracle = qfi_from_sld(rho, sld_spectral(spectrum, drho)).value
        closed = qfi_quadratic(rho, drho, coeffs, spectrum=spectrum)
        assert abs(closed.value - oracle) <= 1e-8 * max(1.0, oracle)
        assert closed.diagnostics["oracle_diff"] <= 1e-8 * max(1.0, oracle)
        assert qfi_lower_bound(coeffs, spectrum.support_rank) <= closed.value + 1e-10


@pytest.mark.parametrize(("dim", "k"), [(3, 1), (3, 2), (4, 1), (4, 2), (4, 3)])
def test_quadratic_closed_form_on_two_eigenvalue_states(dim, k, rng) -> None:
    for _ in range(20):
        p_plus = rng.uniform(0.05, 0.95) / k
        rho, drho = _two_level_family(rng, dim, k, p_plus, rng.normal())
        spectrum = spectral_decompose(rho)
        coeffs = closed_form_coefficients(spectrum, drho)
        assert coeffs is not None
        assert coeffs.support_rank == dim
        spectral = sld_spectral(spectrum, drho)
        oracle = qfi_from_sld(rho, spectral).value
        closed = qfi_quadratic(rho, drho, coeffs, spectrum=spectrum)
        assert abs(closed.value - oracle) <= 1e-8 * max(1.0, oracle)
        assert qfi_lower_bound(coeffs, spectrum.support_rank) <= closed.value + 1e-10
        sld = sld_quadratic_class(rho, drho, coeffs, spectrum=spectrum)
        assert sld.diagnostics["residual"] <= 1e-10
        assert compare_slds(sld, spectral) <= 1e-8


def test_quadratic_closed_form_on_rank_deficient_support(rng) -> None:
    dim, k = 4, 2
    u = scipy.stats.unitary_group.rvs(dim, random_state=rng)
    proj = u[:, :k] @ u[:, :k].conj().T
    rho = validate_density(proj / k)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    g = (g + g.conj().T) / 2
    drho = 1j * (g @ rho.mat - rho.mat @ g)
    spectrum = spectral_decompose(rho)
    coeffs = closed_form_coefficients(spectrum, drho)
    assert coeffs is not None
    assert (coeffs.alpha, coeffs.beta) == pytest.approx((0.5, 0.0))
    assert coeffs.d_beta == 0.0
    closed = qfi_quadratic(rho, drho, coeffs, spectrum=spectrum)
    oracle = qfi_from_sld(rho, sld_spectral(spectrum, drho)).value
    assert closed.value == pytest.approx(oracle, rel=1e-8)


def test_detect_quadratic_class_cases() -> None:
    pure = detect_quadratic_class(spectral_decompose(validate_density(np.diag([1.0, 0.0, 0.0]))))
    assert pure is not None
    assert (pure.alpha, pure.beta, pure.purity) == pytest.approx((1.0, 0.0, 1.0))

    two = detect_quadratic_class(spectral_decompose(validate_density(np.diag([0.4, 0.4, 0.2]))))
    assert two is not None
    assert (two.alpha, two.beta) == pytest.approx((0.6, 0.08))
    assert two.purity == pytest.approx(0.36)
    assert two.eig_pair == pytest.approx((0.4, 0.2))

    three = validate_density(np.diag([0.5, 0.3, 0.2]))
    assert detect_quadratic_class(spectral_decompose(three)) is None
    mixed = validate_density(np.eye(3) / 3)
    assert detect_quadratic_class(spectral_decompose(mixed)) is None


def test_splitting_cluster_is_a_class_violation() -> None:
    rho = validate_density(np.diag([0.4, 0.4, 0.2]))
    drho = np.diag([0.1, -0.1, 0.0])
    with pytest.raises(ClassViolation):
        closed_form_coefficients(spectral_decompose(rho), drho)


def test_depolarized_pure_qubit_coefficients() -> None:
    eta = 0.8
    rho = validate_density(eta * np.diag([1.0, 0.0]) + (1 - eta) * np.eye(2) / 2)
    coeffs = detect_quadratic_class(spectral_decompose(rho))
    assert coeffs is not None
    assert coeffs.alpha == pytest.approx(1.0, abs=1e-12)
    assert coeffs.beta == pytest.approx(0.09, abs=1e-12)


def test_bloch_helpers(rng) -> None:
    r = rng.normal(size=3)
    r *= 0.7 / np.linalg.norm(r)
    rho = bloch_state(r)
    assert np.allclose(bloch_vector(rho), r, atol=1e-14)
    assert purity(rho) == pytest.approx((1 + 0.49) / 2)


def test_bloch_qubit_pure_branch() -> None:
    r = np.array([1.0, 0.0, 0.0])
    dr = np.array([0.0, 1.0, 0.0])
    sld = sld_bloch_qubit(r, dr)
    drho = np.array([[0, -0.5j], [0.5j, 0]])
    assert sld.diagnostics["branch"] == "pure"
    assert np.max(np.abs(sld.mat - 2 * drho)) < 1e-14
    assert qfi_from_sld(validate_density(bloch_state(r)), sld).value == pytest.approx(1.0)


def test_bloch_qubit_mixed_matches_spectral(rng) -> None:
    for _ in range(20):
        r = rng.normal(size=3)
        r *= rng.uniform(0.1, 0.95) / np.linalg.norm(r)
        dr = rng.normal(size=3)
        rho = validate_density(bloch_state(r))
        drho = bloch_state(dr) - np.eye(2) / 2
        spectral = sld_spectral(spectral_decompose(rho), drho)
        assert compare_slds(sld_bloch_qubit(r, dr), spectral) <= 1e-10


def test_bloch_qubit_rejects_long_vector() -> None:
    with pytest.raises(InvalidBloch):
        sld_bloch_qubit([0.0, 0.0, 1.1], [0.0, 0.0, 1.0])


def test_closed_form_sld_checks_class_relation(random_state, random_hermitian) -> None:
    qubit = random_state(2)
    drho = random_hermitian(2)
    coeffs = closed_form_coefficients(spectral_decompose(qubit), drho)
    assert coeffs is not None
    other = validate_density(np.diag([0.5, 0.3, 0.2]))
    wrong = scipy.linalg.block_diag(drho, 0.0)
    with pytest.raises(ClassViolation):
        sld_quadratic_class(other, wrong, coeffs)
