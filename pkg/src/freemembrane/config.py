"""Scenario configuration files (YAML) for the command-line runner.

A config has a ``device`` block, a ``solver`` block and one block per
subcommand; every block is optional and falls back to the defaults below.
The device block either lists parameters of the calibrated H-shaped switch
(``preset`` plus overrides) or spells out the full device tree under
``geometry``/``electrodes``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .device import (
    CALIBRATION,
    BeamGeometry,
    ContactSpec,
    DeviceSpec,
    ElectrodeZone,
    MaterialProps,
    switch_device,
    validate_spec,
)
from .errors import ConfigError, FreeMembraneError, IoFailure
from .solver import SolverSettings



class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-6`` style floats (YAML 1.1 needs a dot and a sign)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*\.?[0-9_]*|\.[0-9_]+)[eE][-+]?[0-9]+$"""),
    list("-+0123456789."),
)

PRESET_GAPS = {"default": 1e-6, "stiction": 0.7e-6}

DEFAULTS: dict = {
    "device": {"preset": "default"},
    "solver": {},
    "pullin": {"electrodes": "internal", "v_max": 40.0},
    "pullout": {"electrodes": "internal", "v_start": None, "adhesion": 0.0},
    "cv_curve": {"electrodes": "internal", "v_min": 0.0, "v_max": None, "n_points": 41, "voltages": None},
    "ratio_sweep": {"ratios": [0.05, 0.075, 0.1, 0.125, 0.15, 0.2, 0.25, 0.3], "v_max": 40.0},
    "unstick": {"v_charge": [1.0, 1.6, 2.0, 2.4], "adhesion": 0.0, "v_ext_max": 20.0},
    "table1": {"gap": None},
    "rf": {"f_min": 0.25e9, "f_max": 10e9, "n_points": 40, "circuit": None,
           "targets": {"isolation_db": -30.0, "isolation_hz": 10e9,
                       "insertion_db": -0.45, "insertion_hz": 10e9}, "z0": 50.0},
    "fit_rf": {"isolation_db": -30.0, "isolation_hz": 10e9,
               "insertion_db": -0.45, "insertion_hz": 10e9, "z0": 50.0},
}

_SWITCH_KEYS = {
    "gap", "youngs_modulus", "eps_r", "dielectric_thickness", "length", "thickness", "ratio",
    "leg_width", "bar_width", "leg_inset", "internal_offset", "internal_length",
    "external_clearance", "stop_fraction", "center_width", "center_length",
}
_TREE_KEYS = {"material", "geometry", "electrodes", "gap", "contacts", "plate_modulus"}


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    device: DeviceSpec
    solver: SolverSettings
    blocks: dict
    resolved: dict
    source: str | None = None

    def block(self, name: str) -> dict:
        return self.blocks[name]

    @property
    def digest(self) -> str:
        """SHA-256 of the resolved config in canonical JSON."""
        text = json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _merge(base: dict, over: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base and where not in ("device", "solver"):
            raise ConfigError(f"unknown key {where}.{k}", key=f"{where}.{k}")
        if isinstance(v, dict) and isinstance(base.get(k), dict) and base.get(k):
            out[k] = _merge(base[k], v, f"{where}.{k}")
        else:
            out[k] = v
    return out


def _device_from_block(blk: dict) -> tuple[DeviceSpec, dict]:
    blk = dict(blk)
    preset = blk.pop("preset", "default")
    if "geometry" in blk:
        extra = set(blk) - _TREE_KEYS
        if extra:
            raise ConfigError(f"unknown device keys {sorted(extra)}", key="device")
        try:
            g = blk["geometry"]
            spec = DeviceSpec(
                material=MaterialProps(**blk.get("material", {})),
                geometry=BeamGeometry(
                    length=float(g["length"]), thickness=float(g["thickness"]),
                    width_segments=tuple(tuple(float(x) for x in s) for s in g["width_segments"]),
                    pillar_positions=tuple(float(x) for x in g["pillar_positions"]),
                ),
                electrodes=tuple(ElectrodeZone(**z) for z in blk.get("electrodes", [])),
                gap=float(blk["gap"]),
                contacts=ContactSpec(**{k: (tuple(v) if k == "positions" else v)
                                        for k, v in blk.get("contacts", {}).items()}),
                plate_modulus=bool(blk.get("plate_modulus", False)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"incomplete device tree: {exc}", key="device") from exc
        return spec, blk
    if preset not in PRESET_GAPS:
        raise ConfigError(f"unknown device preset {preset!r}", key="device.preset")
    extra = set(blk) - _SWITCH_KEYS
    if extra:
        raise ConfigError(f"unknown device keys {sorted(extra)}", key="device")
    params = {**CALIBRATION, "gap": PRESET_GAPS[preset], **blk}
    # echo every parameter actually used, calibration included
    return switch_device(**params), {"preset": preset, **dict(sorted(params.items()))}


def _settings(blk: dict) -> SolverSettings:
    names = {f.name for f in fields(SolverSettings)}
    extra = set(blk) - names
    if extra:
        raise ConfigError(f"unknown solver keys {sorted(extra)}", key="solver")
    try:
        return SolverSettings(**blk)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver settings: {exc}", key="solver") from exc


def resolve(raw: dict | None, source: str | None = None, n_elements: int | None = None) -> ScenarioConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config blocks {sorted(unknown)}", key=",".join(sorted(unknown)))
    resolved = {}
    for name, default in DEFAULTS.items():
        blk = raw.get(name) or {}
        if not isinstance(blk, dict):
            raise ConfigError(f"block {name!r} must be a mapping", key=name)
        if name == "device":
            merged = dict(blk) if blk else dict(default)
        else:
            merged = _merge(default, blk, name)
        resolved[name] = merged
    if n_elements is not None:
        resolved["solver"]["n_elements"] = int(n_elements)
    try:
        device, resolved["device"] = _device_from_block(resolved["device"])
        validate_spec(device)
    except FreeMembraneError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid device: {exc}", key="device", cause=exc.code) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid device: {exc}", key="device") from exc
    solver = _settings(resolved["solver"])
    resolved["solver"] = asdict(solver)
    return ScenarioConfig(device, solver, resolved, resolved, source)


def load_config(path=None, n_elements: int | None = None) -> ScenarioConfig:
    """Read a YAML config; ``None`` gives the defaults."""
    if path is None:
        return resolve({}, None, n_elements)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read config {p}: {exc}", path=str(p)) from exc
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p} is not valid YAML: {exc}", path=str(p)) from exc
    return resolve(raw, str(p), n_elements)
