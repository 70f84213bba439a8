"""Route selection, QFI evaluation, sweeps and cross-validation over a model."""

from __future__ import annotations

import itertools
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Literal, get_args

import numpy as np

from sldkit.channels import (
    EtaBoundary,
    block_diagonal_state,
    sld_block_diagonal,
    sld_eta,
    sld_theta_depolarized,
    split_blocks,
)
from sldkit.config import SldkitConfig
from sldkit.errors import ClassViolation, InputError, NotFullRank, SldkitError, SolverError
from sldkit.estimation.crb import CRBReport, simulate_crb
from sldkit.linalg.density import (
    ComplexMatrix,
    DensityMatrix,
    commutator,
    dagger,
    max_abs,
    validate_density,
)
from sldkit.linalg.spectrum import Spectrum, spectral_decompose
from sldkit.logging.events import EventBus, null_bus
from sldkit.model.evaluate import (
    DerivativeMode,
    ParameterPoint,
    eval_derivative,
    eval_model,
    make_env,
)
from sldkit.model.expression import evaluate
from sldkit.model.spec import DepolarizedNode, ModelSpec
from sldkit.qfi import (
    qfi_from_sld,
    qfi_lower_bound,
    qfi_matrix,
    qfi_matrix_quadratic,
    qfi_quadratic,
)
from sldkit.sld.lyapunov import sld_quadrature, sld_series
from sldkit.sld.operator import SLDOperator, compare_slds, make_sld
from sldkit.sld.quadratic import (
    QuadraticClassCoefficients,
    bloch_vector,
    closed_form_coefficients,
    sld_bloch_qubit,
    sld_quadratic_class,
)
from sldkit.sld.spectral import (
    eigen_operator_rate,
    sld_commuting,
    sld_eigen_operator,
    sld_spectral,
    sld_sylvester,
)
from sldkit.types import (
    QfiMatrixRecord,
    QfiRecord,
    SldRecord,
    XvalPair,
    XvalRecord,
    XvalRoute,
    complex_pairs,
    to_jsonable,
)
from sldkit.unitary import effective_sld, unitary_frame

Method = Literal[
    "auto",
    "spectral",
    "sylvester",
    "quadrature",
    "series",
    "closed_form",
    "commuting",
    "eigen_operator",
    "bloch",
    "unitary",
    "block_diagonal",
    "depolarizing",
]
METHODS: tuple[str, ...] = get_args(Method)

EXACT_ROUTES = (
    "spectral",
    "sylvester",
    "closed_form",
    "commuting",
    "eigen_operator",
    "bloch",
    "unitary",
    "block_diagonal",
    "depolarizing",
)
APPROXIMATE_ROUTES = ("quadrature", "series")


class RouteNotApplicable(SolverError):
    pass


@dataclass(frozen=True, eq=False)
class PointState:
    spec: ModelSpec
    at: dict[str, float]
    which: str
    rho: DensityMatrix
    spectrum: Spectrum
    drho: ComplexMatrix


def parse_method(name: str) -> Method:
    for method in get_args(Method):
        if method == name:
            return method
    raise InputError(f"unknown method {name!r}; choose one of {list(METHODS)}")


def choose_parameter(spec: ModelSpec, which: str | None) -> str:
    if which is not None:
        if which not in spec.parameters:
            raise InputError(f"{spec.name}: no parameter {which!r}; have {list(spec.parameters)}")
        return which
    if len(spec.parameters) != 1:
        raise InputError(
            f"{spec.name}: pick the parameter with --which among {list(spec.parameters)}"
        )
    return spec.parameters[0]


class Workbench:
    def __init__(
        self,
        config: SldkitConfig,
        bus: EventBus | None = None,
        derivative_mode: DerivativeMode = "dual",
    ) -> None:
        self.config = config
        self.bus = bus or null_bus()
        self.derivative_mode: DerivativeMode = derivative_mode
        self.options = config.solver.model_copy(update={"rank_tol": config.tolerances.rank_tol})
        self._routes: dict[str, Callable[[PointState], SLDOperator]] = {
            "spectral": self._spectral,
            "sylvester": self._sylvester,
            "quadrature": lambda p: sld_quadrature(p.rho, p.drho, self.options),
            "series": lambda p: sld_series(p.rho, p.drho, self.options),
            "closed_form": self._closed_form,
            "commuting": self._commuting,
            "eigen_operator": self._eigen_operator,
            "bloch": self._bloch,
            "unitary": self._unitary,
            "block_diagonal": self._block_diagonal,
            "depolarizing": self._depolarizing,
        }

    @property
    def rank_tol(self) -> float:
        return self.config.tolerances.rank_tol

    @property
    def class_tol(self) -> float:
        return self.config.tolerances.quadratic_tol

    def point(self, spec: ModelSpec, at: ParameterPoint, which: str) -> PointState:
        tolerances = self.config.tolerances.density()
        rho = eval_model(spec, at, tolerances)
        drho = eval_derivative(
            spec, at, which, self.derivative_mode, tolerances, self.rank_tol
        )
        return PointState(
            spec=spec,
            at=dict(at),
            which=which,
            rho=rho,
            spectrum=spectral_decompose(rho, self.rank_tol),
            drho=drho,
        )

    # Routes. RouteNotApplicable means the route's premise does not hold at this point.

    def _spectral(self, p: PointState) -> SLDOperator:
        return sld_spectral(p.spectrum, p.drho, self.rank_tol)

    def _sylvester(self, p: PointState) -> SLDOperator:
        return sld_sylvester(p.rho, p.drho, self.options.abs_tol, self.rank_tol)

    def _coefficients(self, p: PointState) -> QuadraticClassCoefficients:
        try:
            coeffs = closed_form_coefficients(p.spectrum, p.drho, self.class_tol)
        except ClassViolation as exc:
            raise RouteNotApplicable(f"quadratic class not preserved: {exc}") from exc
        if coeffs is None:
            raise RouteNotApplicable("state does not satisfy rho^2 = alpha rho - beta")
        return coeffs

    def _closed_form(self, p: PointState) -> SLDOperator:
        coeffs = self._coefficients(p)
        return sld_quadratic_class(p.rho, p.drho, coeffs, self.class_tol, spectrum=p.spectrum)

    def _commuting(self, p: PointState) -> SLDOperator:
        gap = max_abs(commutator(p.rho.mat, p.drho))
        if gap > self.options.abs_tol:
            raise RouteNotApplicable(f"rho and drho do not commute (|[rho, drho]| = {gap:.3e})")
        return sld_commuting(p.spectrum, p.drho, self.options.abs_tol)

    def _eigen_operator(self, p: PointState) -> SLDOperator:
        if eigen_operator_rate(p.rho, p.drho) is None:
            raise RouteNotApplicable("drho is not an eigen-operator of {rho, .}")
        return sld_eigen_operator(p.rho, p.drho, self.rank_tol)

    def _bloch(self, p: PointState) -> SLDOperator:
        if p.rho.dim != 2:
            raise RouteNotApplicable(f"Bloch form needs a qubit, dimension is {p.rho.dim}")
        return sld_bloch_qubit(bloch_vector(p.rho.mat), bloch_vector(p.drho))

    def _lab_sld(self, p: PointState, mat: ComplexMatrix, method: str) -> SLDOperator:
        return make_sld(
            mat,
            p.spectrum.support_projector,
            p.spectrum.support_rank,
            method,
            rho=p.rho,
            drho=p.drho,
        )

    def _unitary(self, p: PointState) -> SLDOperator:
        if p.spec.unitary_model is None:
            raise RouteNotApplicable(f"model kind {p.spec.kind!r} is not a unitary channel")
        try:
            frame = unitary_frame(p.spec, p.at, p.which)
        except InputError as exc:
            raise RouteNotApplicable(str(exc)) from exc
        l_eff = effective_sld(frame.rho_in, frame.h, self.rank_tol)
        return self._lab_sld(p, frame.u @ l_eff.mat @ dagger(frame.u), "unitary")

    def _block_diagonal(self, p: PointState) -> SLDOperator:
        sizes = p.spec.block_sizes
        if sizes is None:
            raise RouteNotApplicable(f"model kind {p.spec.kind!r} is not block diagonal")
        state = block_diagonal_state(p.rho, sizes)
        return sld_block_diagonal(state, split_blocks(p.drho, sizes), self.rank_tol)

    def _depolarizing(self, p: PointState) -> SLDOperator:
        node = p.spec.node
        if not isinstance(node, DepolarizedNode):
            raise RouteNotApplicable(f"model kind {p.spec.kind!r} is not depolarized")
        env = make_env(p.spec, p.at, p.which)
        eta = evaluate(node.eta, env)
        inner = node.inner.build(env)
        eta_value = float(np.real(eta.value))
        d_eta = float(np.real(eta.deriv))
        d_inner = np.asarray(inner.deriv, dtype=np.complex128)
        rho_in = validate_density(np.asarray(inner.value, dtype=np.complex128))
        try:
            if max_abs(d_inner) == 0.0 and d_eta != 0.0:
                l_eta = sld_eta(rho_in, eta_value, self.rank_tol)
                return self._lab_sld(p, d_eta * l_eta.mat, "depolarizing")
            if d_eta == 0.0:
                return sld_theta_depolarized(rho_in, d_inner, eta_value, self.class_tol)
        except (EtaBoundary, ClassViolation) as exc:
            raise RouteNotApplicable(str(exc)) from exc
        raise RouteNotApplicable(f"{p.which!r} enters both eta and the input state")

    def run_route(self, name: str, p: PointState) -> SLDOperator:
        if name not in self._routes:
            raise InputError(f"unknown route {name!r}")
        self.bus.emit("route_started", {"route": name, "at": p.at}, level="debug")
        sld = self._routes[name](p)
        self.bus.emit(
            "route_finished",
            {"route": name, "residual": sld.diagnostics.get("residual")},
            level="debug",
        )
        return sld

    def solve_point(self, p: PointState, method: Method) -> SLDOperator:
        if method != "auto":
            return self.run_route(method, p)
        try:
            return self.run_route("closed_form", p)
        except RouteNotApplicable as exc:
            self.bus.emit("route_skipped", {"route": "closed_form", "reason": str(exc)}, "debug")
            return self.run_route("spectral", p)

    def sld(self, spec: ModelSpec, at: ParameterPoint, which: str, method: Method) -> SldRecord:
        p = self.point(spec, at, which)
        sld = self.solve_point(p, method)
        return SldRecord(
            L=complex_pairs(sld.mat),
            gauge=str(sld.gauge),
            residual=float(sld.diagnostics["residual"]),
            method=sld.method,
            parameter=which,
            at=p.at,
            support_rank=sld.support_rank,
            diagnostics=to_jsonable(sld.diagnostics),
        )

    def qfi(self, spec: ModelSpec, at: ParameterPoint, which: str, method: Method) -> QfiRecord:
        p = self.point(spec, at, which)
        sld = self.solve_point(p, method)
        result = qfi_from_sld(p.rho, sld)
        diagnostics: dict[str, Any] = {**sld.diagnostics, **result.diagnostics}
        if sld.method == "closed_form":
            coeffs = self._coefficients(p)
            closed = qfi_quadratic(p.rho, p.drho, coeffs, self.class_tol, spectrum=p.spectrum)
            diagnostics["closed_form_F"] = closed.value
            diagnostics["lower_bound"] = qfi_lower_bound(coeffs, p.spectrum.support_rank)
            if "oracle_diff" in closed.diagnostics:
                diagnostics["oracle_diff"] = closed.diagnostics["oracle_diff"]
        return QfiRecord(
            theta=p.at,
            parameter=which,
            F=result.value,
            method=sld.method,
            diagnostics=to_jsonable(diagnostics),
        )

    def qfi_matrix(self, spec: ModelSpec, at: ParameterPoint, method: Method) -> QfiMatrixRecord:
        points = [self.point(spec, at, name) for name in spec.parameters]
        rho = points[0].rho
        slds = [self.solve_point(p, method) for p in points]
        result = qfi_matrix(rho, slds, spec.parameters)
        diagnostics = dict(result.diagnostics)
        try:
            coeffs = [self._coefficients(p) for p in points]
        except RouteNotApplicable:
            coeffs = []
        if coeffs:
            closed = qfi_matrix_quadratic(
                rho, [p.drho for p in points], coeffs, spec.parameters, self.class_tol
            )
            diagnostics["closed_form_max_diff"] = max_abs(closed.mat - result.mat)
        return QfiMatrixRecord(
            theta=dict(at),
            params=list(spec.parameters),
            F=result.mat.tolist(),
            method=",".join(sorted({s.method for s in slds})),
            psd=result.is_psd,
            min_eigenvalue=result.min_eigenvalue,
            diagnostics=to_jsonable(diagnostics),
        )

    def sweep(
        self,
        spec: ModelSpec,
        at: ParameterPoint,
        name: str,
        values: Sequence[float],
        which: str,
        method: Method,
    ) -> list[QfiRecord]:
        if name not in spec.parameters:
            raise InputError(f"{spec.name}: cannot sweep unknown parameter {name!r}")

        def run_point(index: int) -> QfiRecord:
            record = self.qfi(spec, {**at, name: float(values[index])}, which, method)
            self.bus.emit(
                "sweep_point_finished", {"index": index, "theta": record.theta, "F": record.F}
            )
            return record

        workers = self.config.runtime.workers
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(run_point, range(len(values))))
        return [run_point(i) for i in range(len(values))]

    def xval(self, spec: ModelSpec, at: ParameterPoint, which: str) -> XvalRecord:
        p = self.point(spec, at, which)
        results: dict[str, SLDOperator] = {}
        routes: list[XvalRoute] = []
        for name in (*EXACT_ROUTES, *APPROXIMATE_ROUTES):
            exact = name in EXACT_ROUTES
            try:
                sld = self.run_route(name, p)
            except (RouteNotApplicable, NotFullRank) as exc:
                reason = f"{type(exc).__name__}: {exc}"
                self.bus.emit("route_skipped", {"route": name, "reason": reason}, level="debug")
                routes.append(XvalRoute(name=name, exact=exact, status="skipped", reason=reason))
                continue
            except SldkitError as exc:
                reason = f"{type(exc).__name__}: {exc}"
                self.bus.emit("route_failed", {"route": name, "reason": reason}, level="warn")
                routes.append(XvalRoute(name=name, exact=exact, status="failed", reason=reason))
                continue
            results[name] = sld
            routes.append(
                XvalRoute(
                    name=name,
                    exact=exact,
                    status="ok",
                    F=qfi_from_sld(p.rho, sld).value,
                    residual=float(sld.diagnostics["residual"]),
                )
            )

        qfis = {r.name: r.F for r in routes if r.F is not None}
        pairs: list[XvalPair] = []
        failures = [
            f"route {r.name} failed: {r.reason}"
            for r in routes
            if r.status == "failed" and r.exact
        ]
        warnings = [
            f"route {r.name} failed: {r.reason}"
            for r in routes
            if r.status == "failed" and not r.exact
        ]
        for first, second in itertools.combinations(results, 2):
            bound = self._pair_bound(first, second, results)
            distance = compare_slds(
                results[first], results[second], p.spectrum.support_projector
            )
            f_first, f_second = qfis[first], qfis[second]
            assert f_first is not None and f_second is not None
            gap = abs(f_first - f_second)
            passed = distance <= bound and gap <= bound * max(1.0, abs(f_first))
            pair = XvalPair(
                first=first,
                second=second,
                distance=distance,
                qfi_gap=gap,
                bound=bound,
                passed=passed,
            )
            pairs.append(pair)
            self.bus.emit("xval_pair_compared", pair.model_dump(), level="debug")
            if not passed:
                message = (
                    f"{first} vs {second}: distance {distance:.3e}, QFI gap {gap:.3e}, "
                    f"bound {bound:.1e}"
                )
                # Only disagreement between exact routes fails the run.
                if first in EXACT_ROUTES and second in EXACT_ROUTES:
                    failures.append(message)
                else:
                    warnings.append(message)

        exact_qfis = [r.F for r in routes if r.F is not None and r.exact]
        spread = max(exact_qfis) - min(exact_qfis) if exact_qfis else 0.0
        return XvalRecord(
            theta=p.at,
            parameter=which,
            routes=routes,
            pairs=pairs,
            qfi_spread=spread,
            passed=not failures,
            failures=failures,
            warnings=warnings,
        )

    def _pair_bound(self, first: str, second: str, results: Mapping[str, SLDOperator]) -> float:
        if first in EXACT_ROUTES and second in EXACT_ROUTES:
            return self.config.xval.exact_tol
        bound = self.config.xval.approx_tol
        for name in (first, second):
            bound = max(bound, float(results[name].diagnostics.get("error_estimate", 0.0)))
        return bound

    def crb(
        self, spec: ModelSpec, at: Mapping[str, float], shots: int, trials: int, seed: int
    ) -> CRBReport:
        if len(spec.parameters) == 1 and spec.parameters[0] not in at:
            raise InputError(f"{spec.name}: give the true value with --at {spec.parameters[0]}=X")
        theta = float(at[spec.parameters[0]]) if spec.parameters[0] in at else float("nan")

        def on_trial(trial: int, estimate: float) -> None:
            self.bus.emit("crb_trial_finished", {"trial": trial, "estimate": estimate}, "debug")

        return simulate_crb(
            spec,
            theta,
            shots,
            trials,
            seed,
            opts=self.config.estimation,
            workers=self.config.runtime.workers,
            on_trial=on_trial,
        )
