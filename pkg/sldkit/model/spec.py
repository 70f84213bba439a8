from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Protocol

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from sldkit.errors import InputError
from sldkit.linalg.density import ComplexMatrix
from sldkit.model.dual import Dual, exp, sqrt
from sldkit.model.expression import (
    RESERVED,
    Expression,
    ExpressionSyntaxError,
    evaluate,
    evaluate_constant,
    free_parameters,
    parse_expression,
)

ModelKind = Literal[
    "explicit_matrix",
    "pure_vector",
    "bloch_qubit",
    "classical_diagonal",
    "spectral_ensemble",
    "depolarized",
    "unitary_channel",
    "block_diagonal",
    "thermal_two_gap",
]

Env = Mapping[str, Dual]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

# Slack on |r| <= 1 and on frame orthonormality at evaluation time.
BLOCH_SLACK = 1e-10
FRAME_TOL = 1e-10


class ModelLoadError(InputError):
    pass


class InvalidState(InputError):
    pass


class EvalError(InputError):
    pass


class ModelDocument(BaseModel):
    """JSON model file. Nested documents (inner states, blocks) omit ``parameters``."""

    model_config = ConfigDict(extra="forbid")

    kind: ModelKind
    dim: int | None = Field(default=None, ge=1)
    name: str | None = None
    description: str = ""
    parameters: list[str] = Field(default_factory=list)
    entries: dict[str, Any] = Field(default_factory=dict)
    domain: dict[str, tuple[float, float]] = Field(default_factory=dict)


class StateNode(Protocol):
    dim: int

    def build(self, env: Env) -> Dual: ...


def _expr(raw: object, where: str, allowed: frozenset[str]) -> Expression:
    if isinstance(raw, bool) or not isinstance(raw, str | int | float):
        raise ModelLoadError(f"{where}: expected an expression string or number, got {raw!r}")
    try:
        expr = parse_expression(str(raw))
    except ExpressionSyntaxError as exc:
        raise ModelLoadError(f"{where}: {exc}") from exc
    unknown = free_parameters(expr) - allowed
    if unknown:
        raise ModelLoadError(
            f"{where}: unknown identifier(s) {sorted(unknown)}; declared parameters are "
            f"{sorted(allowed)}"
        )
    return expr


def _expr_list(raw: object, where: str, allowed: frozenset[str], length: int | None) -> tuple[
    Expression, ...
]:
    if not isinstance(raw, list):
        raise ModelLoadError(f"{where}: expected a list")
    if length is not None and len(raw) != length:
        raise ModelLoadError(f"{where}: expected {length} entries, got {len(raw)}")
    return tuple(_expr(item, f"{where}[{idx}]", allowed) for idx, item in enumerate(raw))


def _stack(exprs: Sequence[Expression], env: Env) -> Dual:
    return Dual.stack([evaluate(expr, env) for expr in exprs])


def _stack_rows(rows: Sequence[Sequence[Expression]], env: Env) -> Dual:
    evaluated = [_stack(row, env) for row in rows]
    return Dual(
        np.array([row.value for row in evaluated], dtype=np.complex128),
        np.array([row.deriv for row in evaluated], dtype=np.complex128),
    )


def _require(entries: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in entries:
        raise ModelLoadError(f"{where}: missing entry {key!r}")
    return entries[key]


@dataclass(frozen=True)
class ExplicitMatrixNode:
    dim: int
    matrix: tuple[tuple[Expression, ...], ...]

    def build(self, env: Env) -> Dual:
        return _stack_rows(self.matrix, env)


@dataclass(frozen=True)
class PureVectorNode:
    dim: int
    amplitudes: tuple[Expression, ...]

    def build(self, env: Env) -> Dual:
        psi = _stack(self.amplitudes, env)
        norm = sqrt((psi.conj() * psi).sum())
        psi = psi / norm
        return psi.outer(psi.conj())


@dataclass(frozen=True)
class BlochQubitNode:
    dim: int
    r: tuple[Expression, ...]

    def build(self, env: Env) -> Dual:
        rx, ry, rz = (evaluate(expr, env) for expr in self.r)
        length = math.sqrt(sum(abs(c.value) ** 2 for c in (rx, ry, rz)))
        if length > 1.0 + BLOCH_SLACK:
            raise InvalidState(f"Bloch vector length {length:.12f} exceeds 1")
        identity = np.eye(2, dtype=np.complex128)
        return (rx * PAULI_X + ry * PAULI_Y + rz * PAULI_Z + identity) * 0.5


@dataclass(frozen=True)
class ClassicalDiagonalNode:
    dim: int
    weights: tuple[Expression, ...]

    def build(self, env: Env) -> Dual:
        w = _stack(self.weights, env)
        return (w / w.sum()).diag()


@dataclass(frozen=True)
class SpectralEnsembleNode:
    """sum_i w_i |v_i><v_i| over an orthonormal frame (rows of ``frame``)."""

    dim: int
    weights: tuple[Expression, ...]
    frame: tuple[tuple[Expression, ...], ...]

    def build(self, env: Env) -> Dual:
        w = _stack(self.weights, env)
        w = w / w.sum()
        v = _stack_rows(self.frame, env)
        gram = v.value @ v.value.conj().T
        err = float(np.max(np.abs(gram - np.eye(len(self.frame)))))
        if err > FRAME_TOL:
            raise InvalidState(f"frame is not orthonormal: max |V V^H - 1| = {err:.3e}")
        columns = Dual(v.value.T, v.deriv.T)
        return (columns * w) @ v.conj()


@dataclass(frozen=True)
class DepolarizedNode:
    dim: int
    inner: StateNode
    eta: Expression

    def build(self, env: Env) -> Dual:
        eta = evaluate(self.eta, env)
        eta_value = float(np.real(eta.value))
        if not 0.0 <= eta_value <= 1.0:
            raise InvalidState(f"eta = {eta_value} lies outside [0, 1]")
        rho_in = self.inner.build(env)
        identity = np.eye(self.dim, dtype=np.complex128) / self.dim
        return eta * rho_in + (1 - eta) * identity


@dataclass(frozen=True)
class UnitaryModel:
    """U(theta) given entrywise, or as exp(-i * parameter * G) for a constant Hermitian G."""

    dim: int
    entries: tuple[tuple[Expression, ...], ...] | None = None
    generator: ComplexMatrix | None = field(default=None, compare=False)
    parameter: str | None = None

    def unitary(self, env: Env) -> Dual:
        if self.entries is not None:
            return _stack_rows(self.entries, env)
        assert self.generator is not None and self.parameter is not None
        theta = env[self.parameter]
        value = np.asarray(
            scipy.linalg.expm(-1j * complex(theta.value) * self.generator), dtype=np.complex128
        )
        return Dual(value, -1j * theta.deriv * (self.generator @ value))


@dataclass(frozen=True)
class UnitaryChannelNode:
    dim: int
    initial: StateNode
    unitary_model: UnitaryModel

    def build(self, env: Env) -> Dual:
        u = self.unitary_model.unitary(env)
        return u @ self.initial.build(env) @ u.dagger()


@dataclass(frozen=True)
class BlockDiagonalNode:
    dim: int
    weights: tuple[Expression, ...]
    blocks: tuple[StateNode, ...]

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(block.dim for block in self.blocks)

    def build(self, env: Env) -> Dual:
        w = _stack(self.weights, env)
        w = w / w.sum()
        value = np.zeros((self.dim, self.dim), dtype=np.complex128)
        deriv = np.zeros((self.dim, self.dim), dtype=np.complex128)
        offset = 0
        for idx, block in enumerate(self.blocks):
            weight = Dual(w.value[idx], w.deriv[idx])
            piece = weight * block.build(env)
            stop = offset + block.dim
            value[offset:stop, offset:stop] = piece.value
            deriv[offset:stop, offset:stop] = piece.deriv
            offset = stop
        return Dual(value, deriv)


@dataclass(frozen=True)
class ThermalTwoGapNode:
    """e^{-beta H}/Z, H = diag(lambda1 x (d-1), lambda2) in the computational frame."""

    dim: int
    beta: Expression
    lambda1: Expression
    lambda2: Expression

    def build(self, env: Env) -> Dual:
        beta = evaluate(self.beta, env)
        levels = Dual.stack(
            [evaluate(self.lambda1, env)] * (self.dim - 1) + [evaluate(self.lambda2, env)]
        )
        boltzmann = exp(-(beta * levels))
        return (boltzmann / boltzmann.sum()).diag()


@dataclass(frozen=True)
class ModelSpec:
    name: str
    kind: ModelKind
    dim: int
    parameters: tuple[str, ...]
    domain: Mapping[str, tuple[float, float]]
    node: StateNode
    description: str = ""
    source: Path | None = None

    def build(self, env: Env) -> Dual:
        return self.node.build(env)

    @property
    def unitary_model(self) -> UnitaryModel | None:
        if isinstance(self.node, UnitaryChannelNode):
            return self.node.unitary_model
        return None

    @property
    def block_sizes(self) -> tuple[int, ...] | None:
        if isinstance(self.node, BlockDiagonalNode):
            return self.node.block_sizes
        return None


def _compile_node(
    doc: ModelDocument, dim: int, allowed: frozenset[str], where: str
) -> StateNode:
    entries = doc.entries
    kind = doc.kind

    if kind == "explicit_matrix":
        rows = _require(entries, "matrix", where)
        if not isinstance(rows, list) or len(rows) != dim:
            raise ModelLoadError(f"{where}.matrix: expected {dim} rows")
        return ExplicitMatrixNode(
            dim,
            tuple(
                _expr_list(row, f"{where}.matrix[{idx}]", allowed, dim)
                for idx, row in enumerate(rows)
            ),
        )
    if kind == "pure_vector":
        amplitudes = _require(entries, "amplitudes", where)
        return PureVectorNode(dim, _expr_list(amplitudes, f"{where}.amplitudes", allowed, dim))
    if kind == "bloch_qubit":
        if dim != 2:
            raise ModelLoadError(f"{where}: bloch_qubit requires dim 2, got {dim}")
        r_raw = _require(entries, "r", where)
        return BlochQubitNode(dim, _expr_list(r_raw, f"{where}.r", allowed, 3))
    if kind == "classical_diagonal":
        weights = _require(entries, "weights", where)
        return ClassicalDiagonalNode(dim, _expr_list(weights, f"{where}.weights", allowed, dim))
    if kind == "spectral_ensemble":
        weights = _expr_list(_require(entries, "weights", where), f"{where}.weights", allowed, None)
        frame_raw = _require(entries, "frame", where)
        if not isinstance(frame_raw, list) or len(frame_raw) != len(weights):
            raise ModelLoadError(f"{where}.frame: expected one vector per weight")
        if not 1 <= len(weights) <= dim:
            raise ModelLoadError(f"{where}.weights: expected between 1 and {dim} weights")
        frame = tuple(
            _expr_list(vec, f"{where}.frame[{idx}]", allowed, dim)
            for idx, vec in enumerate(frame_raw)
        )
        return SpectralEnsembleNode(dim, weights, frame)
    if kind == "depolarized":
        inner = _compile_inner(_require(entries, "inner", where), dim, allowed, f"{where}.inner")
        eta = _expr(_require(entries, "eta", where), f"{where}.eta", allowed)
        return DepolarizedNode(dim, inner, eta)
    if kind == "unitary_channel":
        initial = _compile_inner(
            _require(entries, "initial", where), dim, allowed, f"{where}.initial"
        )
        return UnitaryChannelNode(dim, initial, _compile_unitary(entries, dim, allowed, where))
    if kind == "block_diagonal":
        blocks_raw = _require(entries, "blocks", where)
        if not isinstance(blocks_raw, list) or not blocks_raw:
            raise ModelLoadError(f"{where}.blocks: expected a non-empty list")
        weights: list[Expression] = []
        blocks: list[StateNode] = []
        for idx, block in enumerate(blocks_raw):
            block_where = f"{where}.blocks[{idx}]"
            if not isinstance(block, dict):
                raise ModelLoadError(f"{block_where}: expected an object")
            weights.append(_expr(block.get("weight", 1), f"{block_where}.weight", allowed))
            state = _require(block, "state", block_where)
            blocks.append(_compile_inner(state, None, allowed, f"{block_where}.state"))
        total = sum(block.dim for block in blocks)
        if total != dim:
            raise ModelLoadError(f"{where}: block dimensions sum to {total}, expected {dim}")
        return BlockDiagonalNode(dim, tuple(weights), tuple(blocks))
    if kind == "thermal_two_gap":
        if dim < 2:
            raise ModelLoadError(f"{where}: thermal_two_gap requires dim >= 2")
        return ThermalTwoGapNode(
            dim,
            _expr(_require(entries, "beta", where), f"{where}.beta", allowed),
            _expr(_require(entries, "lambda1", where), f"{where}.lambda1", allowed),
            _expr(_require(entries, "lambda2", where), f"{where}.lambda2", allowed),
        )
    raise ModelLoadError(f"{where}: unsupported kind {kind!r}")


def _compile_unitary(
    entries: Mapping[str, Any], dim: int, allowed: frozenset[str], where: str
) -> UnitaryModel:
    if "unitary" in entries:
        rows = entries["unitary"]
        if not isinstance(rows, list) or len(rows) != dim:
            raise ModelLoadError(f"{where}.unitary: expected {dim} rows")
        return UnitaryModel(
            dim,
            entries=tuple(
                _expr_list(row, f"{where}.unitary[{idx}]", allowed, dim)
                for idx, row in enumerate(rows)
            ),
        )
    if "generator" in entries:
        parameter = _require(entries, "parameter", where)
        if parameter not in allowed:
            raise ModelLoadError(f"{where}.parameter: {parameter!r} is not a declared parameter")
        rows = entries["generator"]
        if not isinstance(rows, list) or len(rows) != dim:
            raise ModelLoadError(f"{where}.generator: expected {dim} rows")
        # The generator must be constant: no parameters allowed in its entries.
        exprs = [
            _expr_list(row, f"{where}.generator[{idx}]", frozenset(), dim)
            for idx, row in enumerate(rows)
        ]
        generator = np.array(
            [[evaluate_constant(expr) for expr in row] for row in exprs], dtype=np.complex128
        )
        if float(np.max(np.abs(generator - generator.conj().T))) > 1e-12:
            raise ModelLoadError(f"{where}.generator: matrix is not Hermitian")
        generator.setflags(write=False)
        return UnitaryModel(dim, generator=generator, parameter=str(parameter))
    raise ModelLoadError(f"{where}: unitary_channel needs 'unitary' or 'generator' entries")


def _compile_inner(
    raw: object, dim: int | None, allowed: frozenset[str], where: str
) -> StateNode:
    if not isinstance(raw, dict):
        raise ModelLoadError(f"{where}: expected a nested model object")
    try:
        doc = ModelDocument.model_validate(raw)
    except ValidationError as exc:
        raise ModelLoadError(f"{where}: {exc}") from exc
    if doc.parameters or doc.domain:
        raise ModelLoadError(f"{where}: nested models inherit parameters and domain")
    inner_dim = doc.dim if doc.dim is not None else dim
    if inner_dim is None:
        raise ModelLoadError(f"{where}: nested block needs an explicit 'dim'")
    if dim is not None and inner_dim != dim:
        raise ModelLoadError(f"{where}: dim {inner_dim} does not match enclosing dim {dim}")
    return _compile_node(doc, inner_dim, allowed, where)


def compile_model(doc: ModelDocument, source: Path | None = None) -> ModelSpec:
    name = doc.name or (source.stem if source is not None else doc.kind)
    where = name
    if doc.dim is None:
        raise ModelLoadError(f"{where}: top-level model needs 'dim'")
    if len(set(doc.parameters)) != len(doc.parameters):
        raise ModelLoadError(f"{where}: duplicate parameter names {doc.parameters}")
    clashes = sorted(set(doc.parameters) & RESERVED)
    if clashes:
        raise ModelLoadError(f"{where}: parameter names {clashes} are reserved words")
    for param in doc.parameters:
        if not param.isidentifier() or not param.isascii():
            raise ModelLoadError(f"{where}: parameter name {param!r} is not an identifier")

    domain: dict[str, tuple[float, float]] = {}
    for param in doc.parameters:
        lo, hi = doc.domain.get(param, (-math.inf, math.inf))
        if not lo < hi:
            raise ModelLoadError(f"{where}: empty domain {param} in [{lo}, {hi}]")
        domain[param] = (lo, hi)
    undeclared = sorted(set(doc.domain) - set(doc.parameters))
    if undeclared:
        raise ModelLoadError(f"{where}: domain names undeclared parameters {undeclared}")

    allowed = frozenset(doc.parameters)
    node = _compile_node(doc, doc.dim, allowed, where)
    return ModelSpec(
        name=name,
        kind=doc.kind,
        dim=doc.dim,
        parameters=tuple(doc.parameters),
        domain=domain,
        node=node,
        description=doc.description,
        source=source,
    )


def parse_model(data: Mapping[str, Any], source: Path | None = None) -> ModelSpec:
    try:
        doc = ModelDocument.model_validate(dict(data))
    except ValidationError as exc:
        label = source if source is not None else "<model>"
        raise ModelLoadError(f"Invalid model at {label}: {exc}") from exc
    return compile_model(doc, source)


def load_model(path: Path) -> ModelSpec:
    if not path.exists():
        raise ModelLoadError(f"Model file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"Model file is not valid JSON: {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelLoadError(f"Model file must contain a JSON object: {path}")
    return parse_model(data, path)
