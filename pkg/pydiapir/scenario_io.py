# pyDiapir Module - Scenario Configuration and Output
# -*- coding: utf-8 -*-
"""
 Scenario files, dotted overrides and the snapshot / diagnostics writers.

 Scenario files are TOML with the sections [geometry], [salt], [sediment],
 [time], [gravity], [perturbation], [output] and [solver]. An optional
 top-level `preset = "name"` starts from a built-in scenario; without it the
 default preset is the base. Every value is in base units (m, Pa, kg/m^3,
 Pa Ma, Ma).

 Functions
    parse_config(text, overrides)        # TOML text -> ScenarioConfig
    load_config(path, overrides)         # File -> ScenarioConfig
    load_preset(name, overrides)         # Built-in scenario -> ScenarioConfig
    apply_overrides(raw, overrides)      # ["section.key=value", ...] onto a raw table
    serialize_config(config)             # ScenarioConfig -> canonical TOML
    describe(config)                     # Human readable summary lines
    write_snapshot(state, path)          # Legacy ASCII VTK unstructured grid
    write_diagnostics(series, path)      # CSV, one row per step
"""
import copy
import csv
import json
import logging
import os
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from pydiapir import presets
from pydiapir import tensor_core as tc
from pydiapir.aux import OVERRIDE_REGEX, PRESET_REGEX
from pydiapir.exceptions import InvalidGeometry, IoError, ParseError, ValidationError
from pydiapir.material import TE_MODES, MaterialParams
from pydiapir.mesh import Geometry, Region
from pydiapir.sla import PerturbationSpec
from pydiapir.solver import SOLVERS

log = logging.getLogger(__name__)

DIAGNOSTICS_HEADER = ["step", "time_Ma", "apex_height_m", "min_area_ratio", "max_u_m", "residual",
                      "I1", "I2", "I3"]

# section -> key -> value kind
SCHEMA = {
    "geometry": {
        "length": float, "salt_height": float, "sediment_height": float,
        "nx": int, "ny_salt": int, "ny_sediment": int,
    },
    "salt": {
        "rho0": float, "s1": float, "s2": float, "lambda": float, "mu1": float, "mu2": float,
        "mu3": float, "beta": float, "nearly_incompressible": bool,
    },
    "time": {"dt": float, "n_steps": int, "substeps": int},
    "gravity": {
        "magnitude": float, "ramp_angle_deg": float, "ramp_steps": int,
        "traction_x": float, "traction_y": float,
    },
    "perturbation": {"enabled": bool, "center_x": float, "half_width": float, "amplitude": float},
    "output": {"directory": str, "cadence": int, "decomposition": bool},
    "solver": {"method": str, "tol": float, "max_iter": int, "te_update": str},
}
SCHEMA["sediment"] = SCHEMA["salt"]
SECTIONS = ("geometry", "salt", "sediment", "time", "gravity", "perturbation", "output", "solver")

# config key -> MaterialParams field
MATERIAL_FIELDS = {"lambda": "lam"}


@dataclass(frozen=True)
class GravityConfig:
    magnitude: float       # m/s^2
    ramp_angle_deg: float
    ramp_steps: int
    traction_x: float = 0.0  # Pa, on the top surface
    traction_y: float = 0.0

    @property
    def traction(self):
        return np.array([self.traction_x, self.traction_y])


@dataclass(frozen=True)
class OutputConfig:
    directory: str
    cadence: int
    decomposition: bool = False


@dataclass(frozen=True)
class SolverConfig:
    method: str
    tol: float
    max_iter: int
    te_update: str


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: Geometry
    salt: MaterialParams
    sediment: MaterialParams
    dt: float
    n_steps: int
    gravity: GravityConfig
    perturbation: Optional[PerturbationSpec]
    output: OutputConfig
    solver: SolverConfig
    substeps: int = 1  # SLA increments per reported step

    @property
    def params_by_region(self):
        return {Region.SALT: self.salt, Region.SEDIMENT: self.sediment}

    def validate(self):
        try:
            self.geometry.validate()
        except InvalidGeometry as exc:
            raise ValidationError(str(exc)) from exc
        for name in ("salt", "sediment"):
            try:
                getattr(self, name).validate()
            except ValidationError as exc:
                raise ValidationError(f"[{name}] {exc}") from exc
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ValidationError(f"n_steps must be non-negative, got {self.n_steps}")
        if self.substeps < 1:
            raise ValidationError(f"substeps must be at least 1, got {self.substeps}")
        if not self.gravity.magnitude > 0:
            raise ValidationError("gravity magnitude must be positive")
        if self.gravity.ramp_steps < 1:
            raise ValidationError("ramp_steps must be at least 1")
        if self.perturbation is not None:
            self.perturbation.validate(self.geometry)
        if self.output.cadence < 1:
            raise ValidationError(f"cadence must be at least 1, got {self.output.cadence}")
        if self.solver.method not in SOLVERS:
            raise ValidationError(f"unknown solver method '{self.solver.method}'")
        if not self.solver.tol > 0:
            raise ValidationError("solver tol must be positive")
        if self.solver.max_iter < 1:
            raise ValidationError("solver max_iter must be at least 1")
        if self.solver.te_update not in TE_MODES:
            raise ValidationError(f"unknown te_update mode '{self.solver.te_update}'")
        return self


def _line_of(text, key):
    pattern = re.compile(r'^\s*(\[\s*' + re.escape(key) + r'\s*\]|' + re.escape(key) + r'\s*=)')
    for number, line in enumerate(text.splitlines(), 1):
        if pattern.match(line):
            return number
    return None


def _coerce(section, key, value, kind, text):
    name = f"{section}.{key}"
    ok = {
        bool: isinstance(value, bool),
        int: isinstance(value, int) and not isinstance(value, bool),
        float: isinstance(value, (int, float)) and not isinstance(value, bool),
        str: isinstance(value, str),
    }[kind]
    if not ok:
        raise ParseError(f"{name} must be {kind.__name__}, got {value!r}", line=_line_of(text, key), key=name)
    return kind(value)


def _parse_value(text):
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw, overrides=()):
    """
    Apply dotted overrides to a raw scenario table

    Args:
        raw       = dict as loaded from TOML
        overrides = iterable of "section.key=value"; values are TOML scalars,
                    anything else is taken as a plain string
    """
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        match = OVERRIDE_REGEX.match(item)
        if not match:
            raise ParseError(f"malformed override '{item}' (expected section.key=value)", key=item)
        section, key, value = match.group(1), match.group(2), match.group(3).strip()
        table = raw.setdefault(section, {})
        if not isinstance(table, dict):
            raise ParseError(f"override target '{section}' is not a section", key=f"{section}.{key}")
        table[key] = _parse_value(value)
    return raw


def _merge(raw, text):
    name = raw.get("preset", presets.DEFAULT_PRESET)
    if not isinstance(name, str) or not PRESET_REGEX.match(name) or name not in presets.PRESETS:
        raise ValidationError(f"unknown preset '{name}' (choose from {', '.join(presets.PRESETS)})")
    merged = presets.preset_table(name)
    for section, table in raw.items():
        if section == "preset":
            continue
        if section not in SCHEMA:
            raise ParseError(f"unknown section [{section}]", line=_line_of(text, section), key=section)
        if not isinstance(table, dict):
            raise ParseError(f"[{section}] must be a table", line=_line_of(text, section), key=section)
        for key, value in table.items():
            if key not in SCHEMA[section]:
                raise ParseError(f"unknown key '{key}' in [{section}]", line=_line_of(text, key),
                                 key=f"{section}.{key}")
            merged[section][key] = value
    return merged


def build_config(raw, text=""):
    """Raw table (sections, optional preset) -> validated ScenarioConfig"""
    merged = _merge(raw, text)
    values = {}
    for section in SECTIONS:
        values[section] = {key: _coerce(section, key, value, SCHEMA[section][key], text)
                           for key, value in merged[section].items()}

    g = values["geometry"]
    missing = [k for k in SCHEMA["geometry"] if k not in g]
    if missing:
        raise ParseError(f"[geometry] is missing {', '.join(missing)}", key=f"geometry.{missing[0]}")
    geometry = Geometry(**g)
    try:
        geometry.validate()
    except InvalidGeometry as exc:
        raise ValidationError(str(exc)) from exc

    def material(section):
        table = values[section]
        return MaterialParams(**{MATERIAL_FIELDS.get(k, k): v for k, v in table.items()})

    pert = values["perturbation"]
    perturbation = None
    if pert.get("enabled", False):
        perturbation = PerturbationSpec(
            center_x=pert.get("center_x", geometry.length / 2.0),
            half_width=pert.get("half_width", 2.0 * geometry.length / geometry.nx),
            amplitude=pert.get("amplitude", 0.01 * geometry.salt_height),
        )

    try:
        config = ScenarioConfig(
            geometry=geometry,
            salt=material("salt"),
            sediment=material("sediment"),
            dt=values["time"]["dt"],
            n_steps=values["time"]["n_steps"],
            substeps=values["time"].get("substeps", 1),
            gravity=GravityConfig(**values["gravity"]),
            perturbation=perturbation,
            output=OutputConfig(**values["output"]),
            solver=SolverConfig(**values["solver"]),
        )
    except (TypeError, KeyError) as exc:
        raise ParseError(f"incomplete scenario: {exc}") from exc
    return config.validate()


def parse_config(text, overrides=()):
    """
    Parse and validate a TOML scenario

    Args:
        text      = TOML document
        overrides = "section.key=value" strings applied on top of the file
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = re.search(r'line (\d+)', str(exc))
        raise ParseError(f"malformed scenario: {exc}", line=int(match.group(1)) if match else None) from exc
    return build_config(apply_overrides(raw, overrides), text)


def load_config(path, overrides=()):
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ParseError(f"cannot read scenario file {path}: {exc.strerror}") from exc
    log.debug(f"loaded scenario {path}")
    return parse_config(text, overrides)


def load_preset(name, overrides=()):
    if name not in presets.PRESETS:
        raise ValidationError(f"unknown preset '{name}' (choose from {', '.join(presets.PRESETS)})")
    return build_config(apply_overrides({"preset": name}, overrides))


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return json.dumps(str(value))


def serialize_config(config):
    """Canonical TOML; parse_config(serialize_config(c)) == c"""
    g, gr, o, s = config.geometry, config.gravity, config.output, config.solver
    tables = {
        "geometry": {k: getattr(g, k) for k in SCHEMA["geometry"]},
        "salt": {k: getattr(config.salt, MATERIAL_FIELDS.get(k, k)) for k in SCHEMA["salt"]},
        "sediment": {k: getattr(config.sediment, MATERIAL_FIELDS.get(k, k)) for k in SCHEMA["sediment"]},
        "time": {"dt": config.dt, "n_steps": config.n_steps, "substeps": config.substeps},
        "gravity": {k: getattr(gr, k) for k in SCHEMA["gravity"]},
        "perturbation": {"enabled": config.perturbation is not None},
        "output": {k: getattr(o, k) for k in SCHEMA["output"]},
        "solver": {k: getattr(s, k) for k in SCHEMA["solver"]},
    }
    if config.perturbation is not None:
        p = config.perturbation
        tables["perturbation"].update(center_x=p.center_x, half_width=p.half_width, amplitude=p.amplitude)
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {_toml_value(value)}" for key, value in tables[section].items())
        lines.append("")
    return "\n".join(lines)


def describe(config):
    g = config.geometry
    lines = [
        f"geometry: {g.length:g} m x ({g.salt_height:g} m salt + {g.sediment_height:g} m sediment)",
        f"mesh: {g.nx} x {g.ny} cells, {2 * g.nx * g.ny} triangles, {(g.nx + 1) * (g.ny + 1)} nodes",
        f"time: {config.n_steps} steps of {config.dt:g} Ma ({config.n_steps * config.dt:g} Ma), "
        f"{config.substeps} increments per step",
        f"gravity: {config.gravity.magnitude:g} m/s^2, tilt {config.gravity.ramp_angle_deg:g} deg "
        f"over {config.gravity.ramp_steps} steps",
    ]
    for name in ("salt", "sediment"):
        m = getattr(config, name)
        lines.append(f"{name}: rho0={m.rho0:g} s1={m.s1:g} s2={m.s2:g} lambda={m.lam:g} mu1={m.mu1:g} "
                     f"mu2={m.mu2:g} mu3={m.mu3:g} beta={m.beta:g}")
    if config.perturbation is None:
        lines.append("perturbation: none")
    else:
        p = config.perturbation
        lines.append(f"perturbation: {p.amplitude:g} m at x={p.center_x:g} m, half width {p.half_width:g} m")
    lines.append(f"solver: {config.solver.method}, tol {config.solver.tol:g}, Te update {config.solver.te_update}")
    lines.append(f"output: {config.output.directory}, every {config.output.cadence} steps")
    return lines


def _column(values, fmt="%.17g"):
    return "\n".join(fmt % v for v in values)


def write_snapshot(state, path):
    """
    Legacy VTK 3.0 ASCII unstructured grid of the current configuration

    Args:
        state = SimState
        path  = output file; parent directories are created
    """
    mesh = state.mesh
    if mesh.n_nodes == 0 or mesh.n_elements == 0:
        raise ValidationError("cannot write a snapshot of an empty mesh")
    N, E = mesh.n_nodes, mesh.n_elements
    st = state.states
    u = state.displacement
    parts = [
        "# vtk DataFile Version 3.0",
        f"pydiapir step {state.step} time {state.time!r} Ma",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {N} double",
        "\n".join("%.17g %.17g 0" % (x, y) for x, y in mesh.nodes),
        f"CELLS {E} {4 * E}",
        "\n".join("3 %d %d %d" % tuple(tri) for tri in mesh.triangles),
        f"CELL_TYPES {E}",
        "\n".join(["5"] * E),
        f"CELL_DATA {E}",
        "SCALARS region int 1",
        "LOOKUP_TABLE default",
        _column(mesh.region, "%d"),
    ]
    for name, values in (("p", st.p), ("rho", st.rho), ("detF", tc.det(st.F)),
                         ("Te_xx", st.Te[:, 0, 0]), ("Te_xy", st.Te[:, 0, 1]), ("Te_yy", st.Te[:, 1, 1])):
        parts += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _column(values)]
    parts += [
        f"POINT_DATA {N}",
        "VECTORS displacement double",
        "\n".join("%.17g %.17g 0" % (ux, uy) for ux, uy in u),
    ]
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="ascii") as f:
            f.write("\n".join(parts) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write snapshot {path}: {exc.strerror}") from exc
    log.info(f"snapshot step {state.step} -> {path}")
    return path


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_diagnostics(series, path):
    """CSV with DIAGNOSTICS_HEADER, one row per completed step"""
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", newline="", encoding="ascii") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(DIAGNOSTICS_HEADER)
            for r in series:
                writer.writerow([_cell(v) for v in (r.step, r.time, r.apex_height, r.min_area_ratio, r.max_u,
                                                    r.residual, r.i1, r.i2, r.i3)])
    except OSError as exc:
        raise IoError(f"cannot write diagnostics {path}: {exc.strerror}") from exc
    log.info(f"diagnostics ({len(series)} steps) -> {path}")
    return path
