from __future__ import annotations

import json
import math
from collections.abc import Callable
from pathlib import Path
from typing import Annotated, Any

import numpy as np
import typer
from pydantic import BaseModel, ValidationError
from rich.console import Console
from rich.table import Table

from sldkit.config import (
    ConfigError,
    SldkitConfig,
    discover_config_path,
    load_config,
    resolve_log_level,
    write_default_config,
)
from sldkit.errors import CrossValidationError, InputError, SldkitError
from sldkit.estimation.crb import CRBReport
from sldkit.logging.event_log import EventLog
from sldkit.model.evaluate import DerivativeMode
from sldkit.model.registry import ModelRegistry
from sldkit.model.spec import ModelDocument, ModelSpec
from sldkit.runtime.session import RunSession
from sldkit.runtime.workbench import Workbench, choose_parameter, parse_method
from sldkit.storage.run_layout import RunLayout
from sldkit.types import (
    EventRecord,
    OutputFormat,
    QfiMatrixRecord,
    QfiRecord,
    SldRecord,
    XvalRecord,
)

app = typer.Typer(help="Symmetric logarithmic derivatives and quantum Fisher information")
models_app = typer.Typer(help="List and inspect bundled state models")
config_app = typer.Typer(help="Initialize and validate configuration")
app.add_typer(models_app, name="models")
app.add_typer(config_app, name="config")
console = Console()
err_console = Console(stderr=True)

SCHEMAS: dict[str, type[BaseModel]] = {
    "sld": SldRecord,
    "qfi": QfiRecord,
    "qfi-matrix": QfiMatrixRecord,
    "xval": XvalRecord,
    "crb": CRBReport,
    "event": EventRecord,
    "model": ModelDocument,
    "config": SldkitConfig,
}

ModelOpt = Annotated[str, typer.Option("--model", help="Model file path or bundled model name")]
AtOpt = Annotated[
    list[str] | None, typer.Option("--at", help="Parameter value name=value (repeatable)")
]
WhichOpt = Annotated[
    str | None, typer.Option("--which", help="Parameter to differentiate (multi-parameter models)")
]
MethodOpt = Annotated[str, typer.Option("--method", help="Route name or auto")]
TolOpt = Annotated[float | None, typer.Option("--tol", help="Solver absolute tolerance")]
OutputOpt = Annotated[str, typer.Option("--output", help="json|pretty")]
ModelsDirOpt = Annotated[Path, typer.Option("--models-dir", help="Bundled models directory")]
ConfigOpt = Annotated[Path | None, typer.Option("--config", help="Path to config file")]
DerivativeOpt = Annotated[
    str, typer.Option("--derivative", help="dual|finite_difference")
]


def _fail(exc: SldkitError) -> typer.Exit:
    err_console.print(f"[red]{type(exc).__name__}:[/red] {exc}", soft_wrap=True)
    return typer.Exit(code=exc.exit_code)


def _load_config_or_exit(config_path: Path | None) -> SldkitConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        raise _fail(exc) from exc


def _build_event_renderer() -> Callable[[EventRecord], None]:
    styles = {"error": "red", "warn": "yellow", "info": "cyan", "debug": "dim"}

    def _render(event: EventRecord) -> None:
        style = styles[event.level]
        payload = event.payload
        et = event.event_type
        if et == "run_started":
            text = f"command={payload.get('command')} run={event.run_id}"
        elif et in {"route_skipped", "route_failed"}:
            text = f"route={payload.get('route')} reason={payload.get('reason')}"
        elif et == "route_finished":
            text = f"route={payload.get('route')} residual={payload.get('residual')}"
        elif et == "xval_pair_compared":
            text = (
                f"{payload.get('first')} vs {payload.get('second')} "
                f"distance={payload.get('distance')} passed={payload.get('passed')}"
            )
        elif et == "numerical_warning":
            text = f"{payload.get('category')}: {payload.get('message')}"
        elif et == "run_failed":
            text = f"{payload.get('error')}: {payload.get('message')}"
        else:
            text = " ".join(f"{k}={v}" for k, v in payload.items())
        err_console.print(f"[{style}]{et}[/{style}] {text}", soft_wrap=True)

    return _render


def _parse_assignments(items: list[str] | None) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in items or []:
        name, sep, raw = item.partition("=")
        if not sep or not name.strip():
            raise InputError(f"expected name=value, got {item!r}")
        try:
            out[name.strip()] = float(raw)
        except ValueError as exc:
            raise InputError(f"{name.strip()}: {raw!r} is not a number") from exc
    return out


def parse_sweep(text: str) -> tuple[str, list[float]]:
    """name=lo:hi:steps -> (name, inclusive grid of ``steps`` points)."""
    name, sep, spec = text.partition("=")
    parts = spec.split(":")
    if not sep or len(parts) != 3 or not name.strip():
        raise InputError(f"expected --sweep name=lo:hi:steps, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InputError(f"bad sweep range {spec!r}: {exc}") from exc
    if steps < 1:
        raise InputError(f"sweep needs at least one step, got {steps}")
    return name.strip(), [float(v) for v in np.linspace(lo, hi, steps)]


def _output_format(value: str) -> OutputFormat:
    if value == "json":
        return "json"
    if value == "pretty":
        return "pretty"
    raise InputError(f"--output must be json or pretty, got {value!r}")


def _emit(record: BaseModel, output: OutputFormat) -> str:
    text = record.model_dump_json()
    if output == "pretty":
        console.print_json(text)
    else:
        typer.echo(text)
    return text


def _resolve_model(ref: str, models_dir: Path) -> ModelSpec:
    return ModelRegistry(models_dir).resolve(ref)


class _Invocation:
    """Config, session and workbench shared by the numerical commands."""

    def __init__(
        self,
        command: str,
        config_path: Path | None,
        tol: float | None = None,
        derivative: str = "dual",
    ) -> None:
        self.config = _load_config_or_exit(config_path)
        if tol is not None:
            self.config.solver.abs_tol = tol
        try:
            level = resolve_log_level(self.config)
        except ConfigError as exc:
            raise _fail(exc) from exc
        self.session = RunSession(self.config, command, level, _build_event_renderer())
        if derivative not in {"dual", "finite_difference"}:
            raise _fail(InputError("--derivative must be dual or finite_difference"))
        mode: DerivativeMode = "dual" if derivative == "dual" else "finite_difference"
        self.bench = Workbench(self.config, self.session.bus, mode)

    def run(self, body: Callable[[], Any]) -> Any:
        try:
            with self.session:
                return body()
        except SldkitError as exc:
            raise _fail(exc) from exc
        except ValidationError as exc:
            raise _fail(InputError(str(exc))) from exc


@app.command("sld")
def sld_command(
    model: ModelOpt,
    at: AtOpt = None,
    which: WhichOpt = None,
    method: MethodOpt = "auto",
    tol: TolOpt = None,
    output: OutputOpt = "json",
    derivative: DerivativeOpt = "dual",
    models_dir: ModelsDirOpt = Path("./models"),
    config: ConfigOpt = None,
) -> None:
    inv = _Invocation("sld", config, tol, derivative)

    def body() -> None:
        spec = _resolve_model(model, models_dir)
        inv.session.bus.emit("model_loaded", {"model": spec.name, "kind": spec.kind})
        record = inv.bench.sld(
            spec, _parse_assignments(at), choose_parameter(spec, which), parse_method(method)
        )
        inv.session.save_result("sld.json", _emit(record, _output_format(output)))

    inv.run(body)


@app.command("qfi")
def qfi_command(
    model: ModelOpt,
    at: AtOpt = None,
    which: WhichOpt = None,
    method: MethodOpt = "auto",
    sweep: Annotated[
        str | None, typer.Option("--sweep", help="name=lo:hi:steps, one JSON line per point")
    ] = None,
    matrix: Annotated[
        bool, typer.Option("--matrix", help="QFI matrix over all parameters")
    ] = False,
    tol: TolOpt = None,
    output: OutputOpt = "json",
    derivative: DerivativeOpt = "dual",
    models_dir: ModelsDirOpt = Path("./models"),
    config: ConfigOpt = None,
) -> None:
    inv = _Invocation("qfi", config, tol, derivative)

    def body() -> None:
        spec = _resolve_model(model, models_dir)
        inv.session.bus.emit("model_loaded", {"model": spec.name, "kind": spec.kind})
        point = _parse_assignments(at)
        fmt = _output_format(output)
        chosen = parse_method(method)
        if matrix:
            if sweep is not None:
                raise InputError("--matrix and --sweep cannot be combined")
            record = inv.bench.qfi_matrix(spec, point, chosen)
            inv.session.save_result("qfi_matrix.json", _emit(record, fmt))
            return
        name = choose_parameter(spec, which)
        if sweep is None:
            inv.session.save_result(
                "qfi.json", _emit(inv.bench.qfi(spec, point, name, chosen), fmt)
            )
            return
        swept, values = parse_sweep(sweep)
        records = inv.bench.sweep(spec, point, swept, values, name, chosen)
        lines = [_emit(r, fmt) for r in records]
        inv.session.save_result("qfi_sweep.jsonl", "\n".join(lines) + "\n")

    inv.run(body)


@app.command("xval")
def xval_command(
    model: ModelOpt,
    at: AtOpt = None,
    which: WhichOpt = None,
    tol: TolOpt = None,
    output: OutputOpt = "json",
    derivative: DerivativeOpt = "dual",
    models_dir: ModelsDirOpt = Path("./models"),
    config: ConfigOpt = None,
) -> None:
    inv = _Invocation("xval", config, tol, derivative)

    def body() -> None:
        spec = _resolve_model(model, models_dir)
        inv.session.bus.emit("model_loaded", {"model": spec.name, "kind": spec.kind})
        record = inv.bench.xval(spec, _parse_assignments(at), choose_parameter(spec, which))
        inv.session.save_result("xval.json", _emit(record, _output_format(output)))
        if not record.passed:
            raise CrossValidationError("; ".join(record.failures))

    inv.run(body)


@app.command("crb")
def crb_command(
    model: ModelOpt,
    at: AtOpt = None,
    shots: Annotated[int, typer.Option("--shots", help="Outcomes per trial")] = 10_000,
    trials: Annotated[int, typer.Option("--trials", help="Independent trials")] = 200,
    seed: Annotated[int, typer.Option("--seed", min=0, help="Random seed")] = 0,
    output: OutputOpt = "json",
    models_dir: ModelsDirOpt = Path("./models"),
    config: ConfigOpt = None,
) -> None:
    inv = _Invocation("crb", config)

    def body() -> None:
        spec = _resolve_model(model, models_dir)
        inv.session.bus.emit("model_loaded", {"model": spec.name, "kind": spec.kind})
        report = inv.bench.crb(spec, _parse_assignments(at), shots, trials, seed)
        inv.session.save_result("crb.json", _emit(report, _output_format(output)))

    inv.run(body)


@models_app.command("list")
def models_list(models_dir: ModelsDirOpt = Path("./models")) -> None:
    registry = ModelRegistry(models_dir)
    try:
        specs = registry.load()
    except SldkitError as exc:
        raise _fail(exc) from exc
    if not specs:
        console.print("No models found")
        return

    table = Table(title="Models")
    table.add_column("Name")
    table.add_column("Kind")
    table.add_column("Dim")
    table.add_column("Parameters")
    table.add_column("Description")
    for spec in specs:
        table.add_row(
            spec.name, spec.kind, str(spec.dim), ", ".join(spec.parameters), spec.description
        )
    console.print(table)


@models_app.command("inspect")
def models_inspect(
    name: Annotated[str, typer.Argument(help="Model name or path")],
    models_dir: ModelsDirOpt = Path("./models"),
) -> None:
    try:
        spec = _resolve_model(name, models_dir)
    except SldkitError as exc:
        raise _fail(exc) from exc
    summary = {
        "name": spec.name,
        "kind": spec.kind,
        "dim": spec.dim,
        "parameters": list(spec.parameters),
        "domain": {
            k: [lo if math.isfinite(lo) else str(lo), hi if math.isfinite(hi) else str(hi)]
            for k, (lo, hi) in spec.domain.items()
        },
        "description": spec.description,
        "source": str(spec.source) if spec.source else None,
    }
    console.print_json(json.dumps(summary))


@app.command("schema")
def schema_command(
    name: Annotated[str, typer.Argument(help=f"One of: {', '.join(SCHEMAS)}")],
) -> None:
    model = SCHEMAS.get(name)
    if model is None:
        raise _fail(InputError(f"unknown schema {name!r}; choose one of {list(SCHEMAS)}"))
    typer.echo(json.dumps(model.model_json_schema(), indent=2))


@app.command("replay")
def replay_command(
    run_id: Annotated[str, typer.Argument(help="Run ID")],
    event_stream: Annotated[bool, typer.Option(help="Replay events as a stream")] = True,
    event_type: Annotated[
        list[str] | None, typer.Option("--type", help="Only these event types (repeatable)")
    ] = None,
    config: ConfigOpt = None,
) -> None:
    cfg = _load_config_or_exit(config)
    if not cfg.logging.jsonl_dir:
        raise _fail(ConfigError("logging.jsonl_dir is not set; no event streams are recorded"))
    layout = RunLayout(Path(cfg.logging.jsonl_dir), run_id, cfg.logging.events_filename)
    if not layout.events_file.exists():
        raise _fail(InputError(f"Events file not found: {layout.events_file}"))

    for event in EventLog(layout.events_file).read(event_types=event_type or None):
        if event_stream:
            console.print(
                f"[{event.timestamp}] {event.level} {event.event_type} "
                f"run={event.run_id} payload={event.payload}",
                soft_wrap=True,
            )
        else:
            console.print_json(event.model_dump_json())
    records = layout.saved_records()
    if records and event_stream:
        console.print(f"records: {', '.join(records)}", soft_wrap=True)


@config_app.command("init")
def config_init(
    output: Annotated[Path, typer.Option(help="Output config path")] = Path("./sldkit.yaml"),
    force: Annotated[bool, typer.Option(help="Overwrite existing config file")] = False,
) -> None:
    try:
        write_default_config(output, overwrite=force)
    except ConfigError as exc:
        raise _fail(exc) from exc
    console.print(f"Wrote config file: {output}")


@config_app.command("validate")
def config_validate(
    file: Annotated[Path, typer.Option(help="Config file path")] = Path("sldkit.yaml"),
) -> None:
    _ = _load_config_or_exit(file)
    console.print(f"Config valid: {file}")


@app.command("config-path")
def config_path() -> None:
    path = discover_config_path(None)
    if path is None:
        console.print("No config discovered; using built-in defaults")
        return
    console.print(str(path))


def main() -> None:
    app()


if __name__ == "__main__":
    main()
