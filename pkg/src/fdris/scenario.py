"""Scenario files: system parameters, solver options and an experiment block.

Files are YAML or JSON.  Angles are given in degrees and powers in dBm (or
dB for ratios) at the file boundary; everything is converted to SI units on
load.  Unknown keys are rejected so that typos do not silently fall back to
defaults.

Example::

    preset: paper-sec5
    seed: 7
    system:
      n_tx: 8
      p_max_dbm: 25
    experiment:
      axis: L
      values: [4, 8, 12, 16]
      replicates: 10
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .array_model import ArrayShape, PolarPosition, SPEED_OF_LIGHT
from .channel import PathLossModel
from .config import PRESETS, SystemConfig, db_to_linear, dbm_to_watt, watt_to_dbm
from .solver import SCHEMES, SolverOptions

SWEEP_AXES = ("L", "n_tx", "p_max_dbm", "weights")


class ScenarioError(ValueError):
    """Invalid scenario file; the message names the offending key or line."""


@dataclass(frozen=True)
class Experiment:
    """Sweep definition; ``axis=None`` means a single point."""

    axis: str | None = None
    values: tuple = ()
    replicates: int = 1
    schemes: tuple[str, ...] = ("fdris", "ris")
    out: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.axis is not None and self.axis not in SWEEP_AXES:
            raise ScenarioError(f"experiment.axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if self.axis is not None and not self.values:
            raise ScenarioError("experiment.values must be non-empty when an axis is set")
        if self.replicates < 1:
            raise ScenarioError("experiment.replicates must be at least 1")
        if self.workers < 1:
            raise ScenarioError("experiment.workers must be at least 1")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ScenarioError(f"unknown scheme {s!r}; expected one of {SCHEMES}")

    def points(self) -> list:
        return list(self.values) if self.axis is not None else [None]


@dataclass(frozen=True)
class Scenario:
    config: SystemConfig
    solver: SolverOptions = field(default_factory=SolverOptions)
    experiment: Experiment = field(default_factory=Experiment)
    name: str = ""

    @property
    def seed(self) -> int:
        return self.config.seed


_SYSTEM_KEYS = {
    "R", "S", "M", "N", "spacing_m", "n_tx", "carrier_hz", "harmonic", "amplitude",
    "phase0_deg", "f_min_hz", "f_max_hz", "rician_factor_db", "p_max_dbm", "noise_dbm",
    "weights", "bs", "users", "path_loss",
}
_POSITION_KEYS = {"distance", "azimuth_deg", "elevation_deg"}
_PATH_LOSS_KEYS = {"ref_gain_db", "alpha_br", "alpha_ru"}
_TOP_KEYS = {"name", "preset", "seed", "system", "solver", "experiment"}


def _check_keys(data, allowed, where):
    if not isinstance(data, dict):
        raise ScenarioError(f"{where} must be a mapping")
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(map(str, extra))}")


def _number(data, key, where, kind=float):
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}.{key} must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ScenarioError(f"{where}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _position(data, where) -> PolarPosition:
    _check_keys(data, _POSITION_KEYS, where)
    missing = _POSITION_KEYS - set(data)
    if missing:
        raise ScenarioError(f"{where} is missing {', '.join(sorted(missing))}")
    d = _number(data, "distance", where)
    if not d > 0:
        raise ScenarioError(f"{where}.distance must be positive")
    return PolarPosition.from_degrees(d, _number(data, "azimuth_deg", where),
                                      _number(data, "elevation_deg", where))


def _apply_system(cfg: SystemConfig, data: dict) -> SystemConfig:
    where = "system"
    _check_keys(data, _SYSTEM_KEYS, where)
    changes = {}
    carrier = _number(data, "carrier_hz", where) if "carrier_hz" in data else cfg.carrier
    if not carrier > 0:
        raise ScenarioError("system.carrier_hz must be positive")
    shape = {k: getattr(cfg.shape, k) for k in ("R", "S", "M", "N")}
    for k in shape:
        if k in data:
            shape[k] = _number(data, k, where, int)
    lam = SPEED_OF_LIGHT / carrier
    spacing = _number(data, "spacing_m", where) if "spacing_m" in data else None
    if spacing is None and math.isclose(cfg.shape.spacing, cfg.shape.wavelength / 2):
        spacing = lam / 2
    elif spacing is None:
        spacing = cfg.shape.spacing
    changes["shape"] = ArrayShape(wavelength=lam, spacing=spacing, **shape)
    changes["carrier"] = carrier
    simple = {
        "n_tx": ("n_tx", int, None),
        "harmonic": ("harmonic", int, None),
        "amplitude": ("amplitude", float, None),
        "phase0_deg": ("phase0", float, math.radians),
        "f_min_hz": ("f_min", float, None),
        "f_max_hz": ("f_max", float, None),
        "rician_factor_db": ("rician_factor", float, db_to_linear),
        "p_max_dbm": ("p_max", float, dbm_to_watt),
        "noise_dbm": ("noise_power", float, dbm_to_watt),
    }
    # null stands for the limits that have no finite dB value
    nulls = {"rician_factor_db": math.inf, "p_max_dbm": 0.0}
    for key, (attr, kind, conv) in simple.items():
        if key not in data:
            continue
        if data[key] is None and key in nulls:
            changes[attr] = nulls[key]
            continue
        value = _number(data, key, where, kind)
        changes[attr] = conv(value) if conv else value
    if "bs" in data:
        changes["bs"] = _position(data["bs"], "system.bs")
    if "users" in data:
        users = data["users"]
        if not isinstance(users, list) or not users:
            raise ScenarioError("system.users must be a non-empty list")
        changes["users"] = tuple(_position(u, f"system.users[{i}]") for i, u in enumerate(users))
        if "weights" not in data and len(users) != cfg.K:
            changes["weights"] = ()
    if "weights" in data:
        w = data["weights"]
        if not isinstance(w, list) or not all(isinstance(x, (int, float)) for x in w):
            raise ScenarioError("system.weights must be a list of numbers")
        changes["weights"] = tuple(float(x) for x in w)
    if "path_loss" in data:
        pl = data["path_loss"]
        _check_keys(pl, _PATH_LOSS_KEYS, "system.path_loss")
        ref = pl.get("ref_gain_db", "keep")
        if ref == "keep":
            ref_gain = cfg.path_loss.ref_gain
        elif ref is None or ref == "free-space":
            ref_gain = None
        else:
            ref_gain = db_to_linear(_number(pl, "ref_gain_db", "system.path_loss"))
        changes["path_loss"] = PathLossModel(
            ref_gain=ref_gain,
            alpha_br=_number(pl, "alpha_br", "system.path_loss") if "alpha_br" in pl else cfg.path_loss.alpha_br,
            alpha_ru=_number(pl, "alpha_ru", "system.path_loss") if "alpha_ru" in pl else cfg.path_loss.alpha_ru,
        )
    return replace(cfg, **changes)


def _solver_options(data: dict) -> SolverOptions:
    names = {f.name: f.type for f in fields(SolverOptions)}
    _check_keys(data, names, "solver")
    out = {}
    for key in data:
        kind = int if "iter" in key or "inner" in key else float
        out[key] = _number(data, key, "solver", kind)
        if not out[key] > 0:
            raise ScenarioError(f"solver.{key} must be positive")
    return SolverOptions(**out)


def _experiment(data: dict) -> Experiment:
    allowed = {f.name for f in fields(Experiment)}
    _check_keys(data, allowed, "experiment")
    data = dict(data)
    if "values" in data:
        if not isinstance(data["values"], list):
            raise ScenarioError("experiment.values must be a list")
        data["values"] = tuple(tuple(v) if isinstance(v, list) else v for v in data["values"])
    if "schemes" in data:
        data["schemes"] = tuple(data["schemes"])
    for key in ("replicates", "workers"):
        if key in data:
            data[key] = _number(data, key, "experiment", int)
    return Experiment(**data)


def scenario_from_dict(data: dict, source: str = "<scenario>") -> Scenario:
    """Validate a parsed scenario mapping."""
    if data is None:
        data = {}
    _check_keys(data, _TOP_KEYS, "scenario")
    preset = data.get("preset", "paper-sec5")
    if preset not in PRESETS:
        raise ScenarioError(f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")
    cfg = PRESETS[preset]()
    if "seed" not in data:
        warnings.warn(f"{source}: no seed given, using 0", UserWarning, stacklevel=3)
        seed = 0
    else:
        seed = _number(data, "seed", "scenario", int)
    try:
        cfg = _apply_system(cfg, data.get("system") or {})
        cfg = replace(cfg, seed=seed)
        solver = _solver_options(data.get("solver") or {})
        experiment = _experiment(data.get("experiment") or {})
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{source}: {exc}") from exc
    _check_sweep_values(cfg, experiment)
    return Scenario(config=cfg, solver=solver, experiment=experiment,
                    name=str(data.get("name", Path(source).stem)))


def _check_sweep_values(cfg, exp: Experiment):
    for v in exp.points():
        if v is None:
            continue
        try:
            apply_axis(cfg, exp.axis, v)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"experiment value {v!r} for axis {exp.axis}: {exc}") from exc


def apply_axis(cfg: SystemConfig, axis: str | None, value) -> SystemConfig:
    """Configuration at one sweep point."""
    if axis is None:
        return cfg
    if axis == "L":
        if isinstance(value, bool) or int(value) != value:
            raise ValueError("L must be an integer")
        return cfg.with_subarrays(int(value))
    if axis == "n_tx":
        if isinstance(value, bool) or int(value) != value:
            raise ValueError("n_tx must be an integer")
        return cfg.replace(n_tx=int(value))
    if axis == "p_max_dbm":
        return cfg.replace(p_max=dbm_to_watt(float(value)))
    if axis == "weights":
        return cfg.replace(weights=tuple(float(x) for x in value))
    raise ValueError(f"unknown sweep axis {axis!r}")


def _parse_text(text: str, source: str):
    if source.endswith(".json"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        problem = getattr(exc, "problem", None) or str(exc)
        raise ScenarioError(f"{where}: {problem}") from exc


def load_scenario(path) -> Scenario:
    """Read and validate a YAML or JSON scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from exc
    return scenario_from_dict(_parse_text(text, str(path)), str(path))


def preset_scenario(name: str = "paper-sec5", seed: int = 0) -> Scenario:
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return Scenario(config=replace(PRESETS[name](), seed=seed), name=name)


def _pos_dict(p: PolarPosition) -> dict:
    return {"distance": p.distance, "azimuth_deg": math.degrees(p.azimuth),
            "elevation_deg": math.degrees(p.elevation)}


def scenario_to_dict(scn: Scenario) -> dict:
    """File-format mapping that :func:`scenario_from_dict` maps back to ``scn``."""
    cfg = scn.config
    ref = cfg.path_loss.ref_gain
    exp = scn.experiment
    return {
        "name": scn.name,
        "seed": cfg.seed,
        "system": {
            "R": cfg.shape.R, "S": cfg.shape.S, "M": cfg.shape.M, "N": cfg.shape.N,
            "spacing_m": cfg.shape.spacing,
            "n_tx": cfg.n_tx,
            "carrier_hz": cfg.carrier,
            "harmonic": cfg.harmonic,
            "amplitude": cfg.amplitude,
            "phase0_deg": math.degrees(cfg.phase0),
            "f_min_hz": cfg.f_min,
            "f_max_hz": cfg.f_max,
            "rician_factor_db": None if math.isinf(cfg.rician_factor)
            else 10 * math.log10(cfg.rician_factor),
            "p_max_dbm": watt_to_dbm(cfg.p_max) if cfg.p_max > 0 else None,
            "noise_dbm": watt_to_dbm(cfg.noise_power),
            "weights": list(cfg.weights),
            "bs": _pos_dict(cfg.bs),
            "users": [_pos_dict(u) for u in cfg.users],
            "path_loss": {
                "ref_gain_db": None if ref is None else 10 * math.log10(ref),
                "alpha_br": cfg.path_loss.alpha_br,
                "alpha_ru": cfg.path_loss.alpha_ru,
            },
        },
        "solver": {f.name: getattr(scn.solver, f.name) for f in fields(SolverOptions)},
        "experiment": {
            "axis": exp.axis,
            "values": [list(v) if isinstance(v, tuple) else v for v in exp.values],
            "replicates": exp.replicates,
            "schemes": list(exp.schemes),
            "out": exp.out,
            "workers": exp.workers,
        },
    }
