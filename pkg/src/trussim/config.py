"""Plain-text configuration.

Configuration files are INI files with one section per component::

    [phantom]
    semi_axes = 22, 18, 16
    taper = 0.3

    [pid]
    kp = 2.5, 2.5

    [sweep]
    force_noise = 0.02

    [registration]
    max_iter = 50

    [experiment]
    scenarios = S, H, V, C
    sweeps_per_scenario = 5

Every key is the name of a field of the matching dataclass
(:class:`PhantomModel`, :class:`MotionConfig`, :class:`PidConfig`,
:class:`ImageSpec`, :class:`SweepConfig`, :class:`RegistrationConfig`,
:class:`ExperimentPlan`). Unknown keys are an error. ``phantom.pose`` takes 16
numbers in row-major order.
"""
from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path
from typing import Any

import numpy as np

from .control import PidConfig
from .motion import MotionConfig
from .phantom import PhantomModel
from .segmentation import ImageSpec
from .sweep import SweepConfig

_NESTED = {"phantom": PhantomModel, "motion": MotionConfig, "pid": PidConfig, "image": ImageSpec}


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.reshape(-1).tolist()
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: SweepConfig) -> dict:
    out: dict[str, Any] = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in _NESTED:
            out[f.name] = {g.name: _plain(getattr(value, g.name)) for g in dataclasses.fields(value)}
        else:
            out[f.name] = _plain(value)
    return out


def _build(cls, values: dict):
    kwargs = {}
    for key, value in values.items():
        if key == "pose":
            value = np.asarray(value, dtype=np.float64).reshape(4, 4)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(d: dict) -> SweepConfig:
    kwargs = {}
    for key, value in d.items():
        if key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value)
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return SweepConfig(**kwargs)


def _parse_value(raw: str, default: Any, key: str) -> Any:
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, np.ndarray):
        return np.array([float(x) for x in raw.replace(",", " ").split()]).reshape(default.shape)
    if isinstance(default, (tuple, list)):
        items = [x.strip() for x in raw.replace(",", " ").split()]
        if default and isinstance(default[0], str):
            return tuple(items)
        return tuple(float(x) for x in items)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def _section_overrides(parser: configparser.ConfigParser, section: str, obj, exclude=()) -> dict:
    if not parser.has_section(section):
        return {}
    names = {f.name for f in dataclasses.fields(obj)} - set(exclude)
    out = {}
    for key, raw in parser.items(section):
        if key not in names:
            raise ValueError(f"unknown key [{section}] {key}")
        out[key] = _parse_value(raw, getattr(obj, key), f"{section}.{key}")
    return out


def load_config(path: str | Path | None = None, text: str | None = None):
    """Parse a config file; returns ``(SweepConfig, RegistrationConfig, ExperimentPlan)``.

    Missing sections and keys keep their defaults.
    """
    from .experiment import ExperimentPlan
    from .registration import RegistrationConfig

    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        if not Path(path).exists():
            raise FileNotFoundError(f"config file not found: {path}")
        parser.read(path)
    if text is not None:
        parser.read_string(text)
    known = set(_NESTED) | {"sweep", "registration", "experiment"}
    for section in parser.sections():
        if section not in known:
            raise ValueError(f"unknown config section [{section}]")

    base = SweepConfig()
    nested = {name: dataclasses.replace(getattr(base, name), **_section_overrides(parser, name, getattr(base, name))) for name in _NESTED}
    sweep = dataclasses.replace(base, **nested, **_section_overrides(parser, "sweep", base, exclude=_NESTED))
    reg_default = RegistrationConfig()
    reg = dataclasses.replace(reg_default, **_section_overrides(parser, "registration", reg_default))
    plan_default = ExperimentPlan()
    plan = dataclasses.replace(plan_default, **_section_overrides(parser, "experiment", plan_default))
    return sweep, reg, plan
