from __future__ import annotations

import warnings
from collections.abc import Mapping
from typing import Literal

import numpy as np

from sldkit.errors import InputError
from sldkit.linalg.density import (
    ComplexMatrix,
    DensityMatrix,
    DensityTolerances,
    InvalidDensity,
    hermitize,
    validate_density,
)
from sldkit.linalg.spectrum import DEFAULT_RANK_TOL
from sldkit.model.dual import Dual
from sldkit.model.spec import EvalError, InvalidState, ModelSpec

ParameterPoint = Mapping[str, float]
DerivativeMode = Literal["dual", "finite_difference"]

FD_STEP_SCALE = float(np.cbrt(np.finfo(np.float64).eps))


class UnknownParameter(InputError):
    pass


class DomainEdge(InputError):
    pass


class RankChangeWarning(UserWarning):
    """Finite-difference stencil straddles a point where the rank of the state changes."""


def make_env(spec: ModelSpec, at: ParameterPoint, which: str | None = None) -> dict[str, Dual]:
    unknown = sorted(set(at) - set(spec.parameters))
    if unknown:
        raise UnknownParameter(f"{spec.name}: unknown parameter(s) {unknown}")
    missing = [name for name in spec.parameters if name not in at]
    if missing:
        raise InputError(f"{spec.name}: no value given for parameter(s) {missing}")
    if which is not None and which not in spec.parameters:
        raise UnknownParameter(
            f"{spec.name}: cannot differentiate by {which!r}; "
            f"parameters are {list(spec.parameters)}"
        )
    return {name: Dual.variable(float(at[name]), name == which) for name in spec.parameters}


def eval_dual(spec: ModelSpec, at: ParameterPoint, which: str | None = None) -> Dual:
    env = make_env(spec, at, which)
    with np.errstate(all="ignore"):
        out = spec.build(env)
    if not out.is_finite():
        raise EvalError(f"{spec.name}: non-finite entries at {dict(at)}")
    return out


def eval_model(
    spec: ModelSpec, at: ParameterPoint, tolerances: DensityTolerances | None = None
) -> DensityMatrix:
    out = eval_dual(spec, at)
    try:
        return validate_density(out.value, tolerances)
    except InvalidDensity as exc:
        raise InvalidState(f"{spec.name} at {dict(at)}: {exc}") from exc


def _support_rank(rho: DensityMatrix, rank_tol: float) -> int:
    return int(np.count_nonzero(np.linalg.eigvalsh(rho.mat) > rank_tol))


def eval_derivative(
    spec: ModelSpec,
    at: ParameterPoint,
    which: str,
    mode: DerivativeMode = "dual",
    tolerances: DensityTolerances | None = None,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> ComplexMatrix:
    if mode == "dual":
        return hermitize(np.asarray(eval_dual(spec, at, which).deriv, dtype=np.complex128))

    make_env(spec, at, which)
    theta = float(at[which])
    h = FD_STEP_SCALE * max(1.0, abs(theta))
    lo, hi = spec.domain[which]
    if theta - h < lo or theta + h > hi:
        raise DomainEdge(
            f"{spec.name}: central difference at {which}={theta} with step {h:.3e} leaves "
            f"domain [{lo}, {hi}]"
        )
    center = eval_model(spec, at, tolerances)
    plus = eval_model(spec, {**at, which: theta + h}, tolerances)
    minus = eval_model(spec, {**at, which: theta - h}, tolerances)
    ranks = {_support_rank(state, rank_tol) for state in (minus, center, plus)}
    if len(ranks) > 1:
        warnings.warn(
            f"{spec.name}: rank changes across the finite-difference stencil at "
            f"{which}={theta} (ranks {sorted(ranks)}); derivative may be unreliable",
            RankChangeWarning,
            stacklevel=2,
        )
    return hermitize((plus.mat - minus.mat) / (2 * h))
