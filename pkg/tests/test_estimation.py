from __future__ import annotations

import numpy as np
import pytest

from sldkit.errors import InputError
from sldkit.estimation.crb import (
    DomainTooNarrow,
    EstimationOptions,
    simulate_crb,
    trial_generator,
)
from sldkit.estimation.measurement import (
    InvalidPOVM,
    SingularOutcome,
    classical_fisher,
    classical_fisher_from_state,
    make_povm,
    optimal_measurement,
    outcome_distribution,
)
from sldkit.linalg.density import validate_density
from sldkit.linalg.spectrum import spectral_decompose
from sldkit.model.registry import ModelRegistry
from sldkit.qfi import qfi_from_sld
from sldkit.sld.spectral import sld_spectral


def _random_povm(rng: np.random.Generator, dim: int, outcomes: int):
    raw = []
    for _ in range(outcomes):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        raw.append(g @ g.conj().T)
    w, v = np.linalg.eigh(sum(raw))
    total_inv_sqrt = v @ np.diag(w**-0.5) @ v.conj().T
    return make_povm([total_inv_sqrt @ a @ total_inv_sqrt.conj().T for a in raw])


def test_sld_eigenbasis_saturates_qfi(random_state, random_hermitian, rng) -> None:
    for _ in range(50):
        rho = random_state(2)
        drho = random_hermitian(2)
        sld = sld_spectral(spectral_decompose(rho), drho)
        qfi = qfi_from_sld(rho, sld).value
        fisher = classical_fisher_from_state(optimal_measurement(sld), rho, drho)
        assert fisher == pytest.approx(qfi, rel=1e-6)
        for _ in range(3):
            povm = _random_povm(rng, 2, int(rng.integers(2, 5)))
            assert classical_fisher_from_state(povm, rho, drho) <= qfi + 1e-6


def test_random_measurements_stay_below_qfi_for_qutrits(random_state, random_hermitian, rng):
    for _ in range(20):
        rho = random_state(3)
        drho = random_hermitian(3)
        qfi = qfi_from_sld(rho, sld_spectral(spectral_decompose(rho), drho)).value
        povm = _random_povm(rng, 3, 4)
        assert classical_fisher_from_state(povm, rho, drho) <= qfi + 1e-6


def test_optimal_measurement_groups_degenerate_eigenvalues() -> None:
    rho = validate_density(np.diag([0.5, 0.3, 0.2]))
    drho = np.diag([0.1, 0.0, -0.1])
    sld = sld_spectral(spectral_decompose(rho), drho)
    assert len(optimal_measurement(sld)) == 3
    flat = sld_spectral(spectral_decompose(rho), np.diag([0.0, 0.0, 0.0]))
    assert len(optimal_measurement(flat)) == 1


def test_make_povm_validation() -> None:
    with pytest.raises(InvalidPOVM):
        make_povm([])
    with pytest.raises(InvalidPOVM, match="sum E"):
        make_povm([np.diag([1.0, 0.0]), np.diag([0.0, 0.5])])
    with pytest.raises(InvalidPOVM):
        make_povm([np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])])
    with pytest.raises(InvalidPOVM):
        make_povm([[[0.5, 0.5], [0.0, 0.5]], [[0.5, -0.5], [0.0, 0.5]]])


def test_outcome_distribution_checks_dimension(random_state) -> None:
    povm = make_povm([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    with pytest.raises(InputError):
        outcome_distribution(povm, random_state(3))
    p, dp = outcome_distribution(povm, validate_density(np.diag([0.3, 0.7])))
    assert p == pytest.approx([0.3, 0.7])
    assert np.all(dp == 0.0)


def test_singular_outcome() -> None:
    povm = make_povm([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    rho = validate_density(np.diag([1.0, 0.0]))
    with pytest.raises(SingularOutcome):
        classical_fisher_from_state(povm, rho, np.diag([-1.0, 1.0]))
    # A tangent derivative leaves the null outcome at rest.
    tangent = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert classical_fisher_from_state(povm, rho, tangent) == 0.0


def test_classical_fisher_on_model(models_dir) -> None:
    spec = ModelRegistry(models_dir).resolve("classical_diagonal")
    povm = make_povm([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    theta = 0.3
    assert classical_fisher(povm, spec, {"theta": theta}, "theta") == pytest.approx(
        1 / (theta * (1 - theta))
    )


def test_trial_streams_are_keyed_by_seed_and_trial() -> None:
    a = trial_generator(7, 3).integers(0, 2**31, size=4)
    b = trial_generator(7, 3).integers(0, 2**31, size=4)
    c = trial_generator(7, 4).integers(0, 2**31, size=4)
    d = trial_generator(8, 3).integers(0, 2**31, size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_crb_ratio_near_one(models_dir) -> None:
    spec = ModelRegistry(models_dir).resolve("classical_diagonal")
    report = simulate_crb(spec, 0.3, shots=10_000, trials=2000, seed=0)
    assert report.qfi == pytest.approx(1 / 0.21)
    assert report.classical_fisher == pytest.approx(report.qfi)
    assert report.empirical_mean == pytest.approx(0.3, abs=1e-3)
    assert 0.9 <= report.ratio <= 1.3


def test_crb_variance_scales_with_shots(models_dir) -> None:
    spec = ModelRegistry(models_dir).resolve("classical_diagonal")
    low = simulate_crb(spec, 0.3, shots=2_500, trials=2000, seed=1)
    high = simulate_crb(spec, 0.3, shots=10_000, trials=2000, seed=1)
    assert 3.2 <= low.empirical_variance / high.empirical_variance <= 5.0


def test_crb_is_deterministic_across_workers(models_dir) -> None:
    spec = ModelRegistry(models_dir).resolve("qubit_bloch")
    seen: list[int] = []
    serial = simulate_crb(
        spec, 0.4, shots=1000, trials=20, seed=5, on_trial=lambda t, _: seen.append(t)
    )
    again = simulate_crb(spec, 0.4, shots=1000, trials=20, seed=5)
    threaded = simulate_crb(spec, 0.4, shots=1000, trials=20, seed=5, workers=4)
    assert serial.model_dump_json() == again.model_dump_json() == threaded.model_dump_json()
    assert sorted(seen) == list(range(20))
    other = simulate_crb(spec, 0.4, shots=1000, trials=20, seed=6)
    assert other.empirical_variance != serial.empirical_variance


def test_crb_argument_checks(models_dir) -> None:
    registry = ModelRegistry(models_dir)
    with pytest.raises(InputError, match="scalar parameter required"):
        simulate_crb(registry.resolve("bloch_polar"), 0.3, shots=1000, trials=20, seed=0)
    coin = registry.resolve("classical_diagonal")
    with pytest.raises(DomainTooNarrow):
        simulate_crb(coin, 0.005, shots=1000, trials=20, seed=0)
    with pytest.raises(InputError, match="shots"):
        simulate_crb(coin, 0.3, shots=10, trials=20, seed=0)
    with pytest.raises(InputError, match="trials"):
        simulate_crb(coin, 0.3, shots=1000, trials=2, seed=0)
    for seed in (-1, 2**64):
        with pytest.raises(InputError, match="seed"):
            simulate_crb(coin, 0.3, shots=1000, trials=20, seed=seed)
    narrow = EstimationOptions(edge_fraction=0.4)
    with pytest.raises(DomainTooNarrow):
        simulate_crb(coin, 0.3, shots=1000, trials=20, seed=0, opts=narrow)
