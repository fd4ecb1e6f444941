"""Experiment configuration and on-disk formats (trace CSV, snapshots, report JSON)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .grid import RadialGrid, build_grid
from .initdata import SpikeProfile, build_u0, constant_field, load_initial_table
from .model import ModelError, ModelParams
from .solver import DIAGNOSTIC_COLUMNS, TRACE_COLUMNS, StepControl, Trace

TOOL = "nlfkpp"
TRACE_FILE = "trace.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"
SNAPSHOTS_FILE = "snapshots.npz"
REPORT_FILE = "report.json"
SWEEP_AXES = ("N", "p", "beta", "sigma", "lambda", "delta")


class ConfigError(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


class IoFailure(RuntimeError):
    pass


_MODEL_KEYS = ("N", "p", "beta", "sigma", "lambda", "delta")
_CONTROL_KEYS = ("t_end", "dt_init", "safety", "max_rel_change", "growth", "u_max", "dt_min", "max_steps",
                 "cfl_coeff", "snapshot_times")
_SECTIONS = ("model", "initial", "grid", "control", "outputs", "sweep", "workers", "oracle")
_DEFAULTS = {
    "initial": {"kind": "spike", "value": None, "path": None},
    "grid": {"M": 2048, "gamma": 2.0},
    "outputs": {"directory": None, "stride": 1, "snapshot_levels": None},
    "oracle": {"U0": None, "t_end": 20.0, "D": None, "n_out": 401},
}


def _control_defaults() -> dict:
    base = StepControl()
    return {f.name: getattr(base, f.name) for f in fields(StepControl) if f.name in _CONTROL_KEYS}


def _number(v):
    # YAML 1.1 reads forms such as 1e8 as strings
    if isinstance(v, list):
        return [_number(x) for x in v]
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return v
    return v


def _strict(section: str, given, allowed) -> dict:
    if given is None:
        return {}
    if not isinstance(given, dict):
        raise ConfigError(f"section '{section}' must be a mapping")
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(map(str, unknown))}")
    return {k: v if k in ("kind", "path", "directory") else _number(v) for k, v in given.items()}


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description (every default filled in)."""

    model: dict
    initial: dict
    grid: dict
    control: dict
    outputs: dict
    sweep: dict = field(default_factory=dict)
    workers: int = 1
    oracle: dict = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), compare=False)

    def resolved(self) -> dict:
        return {"model": self.model, "initial": self.initial, "grid": self.grid, "control": self.control,
                "outputs": self.outputs, "sweep": self.sweep, "workers": self.workers, "oracle": self.oracle}

    def params(self, **overrides) -> ModelParams:
        m = {**self.model, **overrides}
        try:
            return ModelParams(N=m["N"], p=m["p"], beta=m["beta"], sigma=m["sigma"], lam=m["lambda"],
                               delta=m["delta"])
        except (ModelError, TypeError) as exc:
            raise ConfigError(f"model: {exc}") from exc

    def build_grid(self, N: int) -> RadialGrid:
        try:
            return build_grid(int(self.grid["M"]), float(self.grid["gamma"]), int(N))
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc

    def step_control(self) -> StepControl:
        c = dict(self.control)
        c["snapshot_times"] = tuple(c["snapshot_times"] or ())
        try:
            return StepControl(**c, stride=int(self.outputs["stride"]),
                               snapshot_levels=self.outputs["snapshot_levels"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"control: {exc}") from exc

    def initial_field(self, params: ModelParams, grid: RadialGrid) -> np.ndarray:
        kind = self.initial["kind"]
        if kind == "spike":
            return build_u0(SpikeProfile.from_params(params), grid)
        if kind == "constant":
            if self.initial["value"] is None or float(self.initial["value"]) < 0:
                raise ConfigError("initial: constant data needs a nonnegative 'value'")
            return constant_field(grid, float(self.initial["value"]))
        if kind == "table":
            if not self.initial["path"]:
                raise ConfigError("initial: table data needs a 'path'")
            path = Path(self.initial["path"])
            try:
                return load_initial_table(path if path.is_absolute() else self.base_dir / path, grid)
            except ValueError as exc:
                raise ConfigError(f"initial: {exc}") from exc
        raise ConfigError(f"initial: unknown kind '{kind}' (spike, constant or table)")


def parse_config(raw: dict, base_dir: Path | str = ".") -> ExperimentConfig:
    """Validate a raw mapping; unknown keys anywhere are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    raw = _strict("<root>", raw, _SECTIONS)
    model = _strict("model", raw.get("model"), _MODEL_KEYS)
    missing = [k for k in _MODEL_KEYS if k not in model]
    if missing:
        raise ConfigError(f"model: missing key(s) {', '.join(missing)}")
    sections = {}
    for name in ("initial", "grid", "outputs", "oracle"):
        sections[name] = {**_DEFAULTS[name], **_strict(name, raw.get(name), _DEFAULTS[name])}
    control = {**_control_defaults(), **_strict("control", raw.get("control"), _CONTROL_KEYS)}
    control["snapshot_times"] = list(control["snapshot_times"] or [])
    sweep = _strict("sweep", raw.get("sweep"), SWEEP_AXES)
    for axis, values in sweep.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep: axis '{axis}' must be a non-empty list")
    workers = raw.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be a positive integer")
    cfg = ExperimentConfig(model=model, initial=sections["initial"], grid=sections["grid"], control=control,
                           outputs=sections["outputs"], sweep={k: sweep[k] for k in sorted(sweep)},
                           workers=workers, oracle=sections["oracle"], base_dir=Path(base_dir))
    if not sweep:
        cfg.params()
    cfg.step_control()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return parse_config(raw, path.parent)


def header(config: dict, **extra) -> dict:
    return {"tool": TOOL, "version": __version__, "config": config, **extra}


def _header_lines(hdr: dict) -> str:
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in hdr.items())


def _write_table(path: Path, hdr: dict, columns, rows: np.ndarray) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(_header_lines(hdr))
            fh.write(",".join(columns) + "\n")
            if len(rows):
                np.savetxt(fh, rows, fmt="%.17g", delimiter=",")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_table(path: Path, columns) -> tuple[dict, np.ndarray]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    hdr = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, sep, value = lines[i][1:].strip().partition(":")
        if not sep:
            raise SchemaMismatch(f"{path}: malformed header line {i + 1}")
        try:
            hdr[key.strip()] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{path}: malformed header line {i + 1}") from exc
        i += 1
    if hdr.get("tool") != TOOL or "config" not in hdr:
        raise SchemaMismatch(f"{path}: not written by {TOOL}")
    if i >= len(lines) or lines[i].strip() != ",".join(columns):
        raise SchemaMismatch(f"{path}: expected columns {','.join(columns)}")
    body = [ln for ln in lines[i + 1:] if ln.strip()]
    try:
        data = np.array([[float(x) for x in ln.split(",")] for ln in body], dtype=float).reshape(-1, len(columns))
    except ValueError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from exc
    return hdr, data


def write_trace(directory: Path, trace: Trace, hdr: dict) -> None:
    directory = Path(directory)
    rows = np.column_stack([np.asarray(trace.columns[c], dtype=float) for c in TRACE_COLUMNS])
    _write_table(directory / TRACE_FILE, hdr, TRACE_COLUMNS, rows)
    if trace.diagnostics:
        diag_cols = ("t",) + DIAGNOSTIC_COLUMNS
        drows = np.column_stack([np.asarray(trace.t)] + [trace.diagnostics[c] for c in DIAGNOSTIC_COLUMNS])
        _write_table(directory / DIAGNOSTICS_FILE, hdr, diag_cols, drows)


def read_trace(path) -> tuple[dict, Trace]:
    """Load a trace CSV and, when present and consistent, its diagnostics sidecar."""
    path = Path(path)
    hdr, data = _read_table(path, TRACE_COLUMNS)
    if len(data) == 0:
        raise SchemaMismatch(f"{path}: no records")
    cols = {c: data[:, i].copy() for i, c in enumerate(TRACE_COLUMNS)}
    cols["monotone_ok"] = cols["monotone_ok"] != 0.0
    diag = {}
    side = path.parent / DIAGNOSTICS_FILE
    if side.exists():
        _, ddata = _read_table(side, ("t",) + DIAGNOSTIC_COLUMNS)
        n = len(data)
        if len(ddata) >= n and np.array_equal(ddata[:n, 0], cols["t"]):
            diag = {c: ddata[:n, i + 1].copy() for i, c in enumerate(DIAGNOSTIC_COLUMNS)}
    return hdr, Trace(cols, diag)


def write_snapshots(directory: Path, snapshots, grid: RadialGrid, hdr: dict) -> None:
    path = Path(directory) / SNAPSHOTS_FILE
    try:
        np.savez(path, header=np.array(json.dumps(hdr, sort_keys=True)), nodes=np.asarray(grid.nodes),
                 labels=np.array([s.label for s in snapshots], dtype=str),
                 t=np.array([s.t for s in snapshots]), sup_u=np.array([s.sup_u for s in snapshots]),
                 values=np.array([s.values for s in snapshots]))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_snapshots(path) -> dict:
    """Return ``{label: (t, values)}`` plus the header under key ``"__header__"``."""
    try:
        with np.load(Path(path)) as z:
            out = {str(lb): (float(t), v.copy()) for lb, t, v in zip(z["labels"], z["t"], z["values"])}
            out["__header__"] = json.loads(str(z["header"]))
    except (OSError, KeyError, ValueError) as exc:
        raise SchemaMismatch(f"{path}: not a snapshot archive ({exc})") from exc
    return out


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    try:
        Path(path).write_text(dumps_json(obj))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_columns(path, hdr: dict, columns, rows) -> None:
    _write_table(Path(path), hdr, columns, np.asarray(rows, dtype=float).reshape(-1, len(columns)))
