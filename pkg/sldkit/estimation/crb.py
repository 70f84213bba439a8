"""Monte-Carlo check of the Cramer-Rao bound with maximum-likelihood estimates.

Each trial samples outcome counts of the SLD-eigenbasis measurement fixed at the
true value, then maximizes the likelihood over the model's declared domain.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.optimize
from numpy.typing import NDArray
from pydantic import BaseModel, Field

from sldkit.errors import InputError, NoConvergence
from sldkit.estimation.measurement import (
    POVM,
    classical_fisher_from_state,
    optimal_measurement,
    outcome_distribution,
)
from sldkit.linalg.density import DensityMatrix
from sldkit.linalg.spectrum import spectral_decompose
from sldkit.model.evaluate import eval_derivative, eval_dual, eval_model
from sldkit.model.spec import ModelSpec
from sldkit.qfi import qfi_from_sld
from sldkit.sld.spectral import sld_spectral

TrialCallback = Callable[[int, float], None]

# Philox keys are two uint64 words: (seed, trial).
SEED_MAX = 2**64 - 1


class DomainTooNarrow(InputError):
    pass


class EstimationOptions(BaseModel):
    grid_points: int = Field(default=512, ge=8)
    refine_tol: float = Field(default=1e-8, gt=0.0)
    edge_fraction: float = Field(default=0.01, ge=0.0, lt=0.5)
    min_shots: int = Field(default=100, ge=1)
    min_trials: int = Field(default=10, ge=2)


class CRBReport(BaseModel):
    model: str
    parameter: str
    theta_true: float
    shots: int
    trials: int
    seed: int
    empirical_mean: float
    empirical_variance: float
    qfi: float
    classical_fisher: float
    ratio: float


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, trial); independent of execution order."""
    key = np.array([seed, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class _Likelihood:
    def __init__(self, spec: ModelSpec, which: str, povm: POVM):
        self.spec = spec
        self.which = which
        self.effects = np.stack(povm.effects)

    def probabilities(self, theta: float) -> NDArray[np.float64]:
        rho = np.asarray(eval_dual(self.spec, {self.which: theta}).value)
        return np.real(np.einsum("xij,ji->x", self.effects, rho))

    def negative_log(self, theta: float, counts: NDArray[np.int64]) -> float:
        p = self.probabilities(theta)
        observed = counts > 0
        if np.any(p[observed] <= 0.0):
            return math.inf
        return -float(np.sum(counts[observed] * np.log(p[observed])))


def _estimate(
    likelihood: _Likelihood,
    grid: NDArray[np.float64],
    grid_probs: NDArray[np.float64],
    counts: NDArray[np.int64],
    opts: EstimationOptions,
) -> float:
    observed = counts > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(grid_probs[:, observed] > 0.0, np.log(grid_probs[:, observed]), -np.inf)
    scores = logs @ counts[observed]
    k = int(np.argmax(scores))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]

    def objective(theta: float) -> float:
        return likelihood.negative_log(theta, counts)

    result = None
    if 0 < k < len(grid) - 1 and scores[k] > max(scores[k - 1], scores[k + 1]):
        try:
            result = scipy.optimize.minimize_scalar(
                objective, bracket=(lo, grid[k], hi), method="golden", tol=opts.refine_tol
            )
        except ValueError:
            result = None
    if result is None:
        result = scipy.optimize.minimize_scalar(
            objective, bounds=(lo, hi), method="bounded", options={"xatol": opts.refine_tol}
        )
    if not result.success:
        raise NoConvergence(f"likelihood refinement near {grid[k]:.6g} failed: {result.message}")
    return float(result.x)


def simulate_crb(
    spec: ModelSpec,
    theta_true: float,
    shots: int,
    trials: int,
    seed: int,
    opts: EstimationOptions | None = None,
    workers: int = 1,
    on_trial: TrialCallback | None = None,
) -> CRBReport:
    options = opts or EstimationOptions()
    if len(spec.parameters) != 1:
        raise InputError(
            f"{spec.name}: scalar parameter required, model has {list(spec.parameters)}"
        )
    which = spec.parameters[0]
    if shots < options.min_shots:
        raise InputError(f"shots={shots} is below the minimum {options.min_shots}")
    if trials < options.min_trials:
        raise InputError(f"trials={trials} is below the minimum {options.min_trials}")
    if not 0 <= seed <= SEED_MAX:
        raise InputError(f"seed={seed} must lie in [0, {SEED_MAX}]")
    lo, hi = spec.domain[which]
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainTooNarrow(f"{spec.name}: {which} needs a finite domain, got [{lo}, {hi}]")
    margin = options.edge_fraction * (hi - lo)
    if not lo + margin < theta_true < hi - margin:
        raise DomainTooNarrow(
            f"{which}={theta_true} lies within {options.edge_fraction:.0%} of the domain "
            f"edge [{lo}, {hi}]"
        )

    at = {which: theta_true}
    rho: DensityMatrix = eval_model(spec, at)
    drho = eval_derivative(spec, at, which)
    sld = sld_spectral(spectral_decompose(rho), drho)
    qfi = qfi_from_sld(rho, sld).value
    povm = optimal_measurement(sld)
    fisher = classical_fisher_from_state(povm, rho, drho)

    p_true, _ = outcome_distribution(povm, rho)
    p_true = np.clip(p_true, 0.0, None)
    p_true = p_true / p_true.sum()

    likelihood = _Likelihood(spec, which, povm)
    # Cell midpoints keep the grid off the domain edges.
    grid = lo + (hi - lo) * (np.arange(options.grid_points) + 0.5) / options.grid_points
    grid_probs = np.stack([likelihood.probabilities(float(t)) for t in grid])

    def run_trial(trial: int) -> float:
        counts = trial_generator(seed, trial).multinomial(shots, p_true).astype(np.int64)
        estimate = _estimate(likelihood, grid, grid_probs, counts, options)
        if on_trial is not None:
            on_trial(trial, estimate)
        return estimate

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            estimates = np.array(list(pool.map(run_trial, range(trials))))
    else:
        estimates = np.array([run_trial(t) for t in range(trials)])

    variance = float(np.var(estimates, ddof=1))
    return CRBReport(
        model=spec.name,
        parameter=which,
        theta_true=theta_true,
        shots=shots,
        trials=trials,
        seed=seed,
        empirical_mean=float(np.mean(estimates)),
        empirical_variance=variance,
        qfi=qfi,
        classical_fisher=fisher,
        ratio=shots * qfi * variance,
    )
