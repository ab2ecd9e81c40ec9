"""Simulated patient motion.

Each period of ``2*pi`` seconds is still for its first three quarters and
then moves with speed ``cos(t/2)`` for the last quarter. Successive bursts
alternate in direction, so the phantom shuttles between its start position
and an excursion of ``sqrt(2) * amplitude``.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

PERIOD = 2 * math.pi
BURST_START = 0.75  # fraction of the period at which motion begins


class Scenario(str, enum.Enum):
    S = "S"  # stationary
    H = "H"  # horizontal
    V = "V"  # vertical
    C = "C"  # combined, horizontal leads vertical by an eighth of a period

    @classmethod
    def parse(cls, tag: "str | Scenario") -> "Scenario":
        try:
            return cls(str(getattr(tag, "value", tag)).upper())
        except ValueError:
            raise ValueError(f"unknown scenario {tag!r}; expected one of S, H, V, C") from None


@dataclass(frozen=True)
class MotionConfig:
    """``amplitude`` scales the unit profile (mm/s).

    The default makes the peak-to-peak excursion 15 mm.
    """

    amplitude: float = 15.0 / math.sqrt(2.0)
    phase_shift: float = PERIOD / 8
    duration: float = 120.0
    seed: int = 0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


def base_velocity(t):
    """Unit speed profile: ``cos(t/2)`` in the last quarter of each period, else 0."""
    t = np.asarray(t, dtype=np.float64)
    frac = t / PERIOD - np.floor(t / PERIOD)
    v = np.where(frac > BURST_START, np.cos(t / 2.0), 0.0)
    return float(v) if v.ndim == 0 else v


def base_displacement(t):
    """Closed-form integral of :func:`base_velocity` from 0 to ``t``.

    Burst ``k`` moves by ``-(-1)**k * sqrt(2)``, so completed bursts sum to
    ``-sqrt(2)`` after an odd count and to 0 after an even one.
    """
    t = np.asarray(t, dtype=np.float64)
    k = np.floor(t / PERIOD)
    completed = np.where(np.mod(k, 2) == 1, -math.sqrt(2.0), 0.0)
    burst_begin = PERIOD * (k + BURST_START)
    partial = np.where(t > burst_begin, 2.0 * (np.sin(t / 2.0) - np.sin(burst_begin / 2.0)), 0.0)
    out = completed + partial
    return float(out) if out.ndim == 0 else out


def _axes(t, scenario: Scenario, cfg: MotionConfig, profile):
    scenario = Scenario.parse(scenario)
    A = cfg.amplitude
    t = np.asarray(t, dtype=np.float64)
    zero = np.zeros_like(t)
    if scenario is Scenario.S:
        y = z = zero
    elif scenario is Scenario.H:
        y, z = A * profile(t), zero
    elif scenario is Scenario.V:
        y, z = zero, A * profile(t)
    else:
        y, z = A * profile(t + cfg.phase_shift), A * profile(t)
    return np.stack(np.broadcast_arrays(zero, y, z), axis=-1)


def velocity(t, scenario: Scenario, cfg: MotionConfig = MotionConfig()) -> NDArray[np.float64]:
    """Phantom velocity in world coordinates (mm/s)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("time must be non-negative")
    return _axes(t, scenario, cfg, base_velocity)


def displacement(t, scenario: Scenario, cfg: MotionConfig = MotionConfig()) -> NDArray[np.float64]:
    """Phantom displacement from its start position, world coordinates (mm).

    The combined scenario's horizontal axis is referenced to its own value at
    ``t = 0`` so that every scenario starts at the origin.
    """
    if np.any(np.asarray(t) < 0):
        raise ValueError("time must be non-negative")
    d = _axes(t, scenario, cfg, base_displacement)
    if Scenario.parse(scenario) is Scenario.C:
        d = d - _axes(0.0, scenario, cfg, base_displacement)
    return d


def write_trace_csv(path: str | Path, scenario: Scenario, cfg: MotionConfig = MotionConfig(), dt: float = 0.01) -> None:
    """Disturbance trace as CSV columns ``t, dx, dy, dz``."""
    n = int(round(cfg.duration / dt)) + 1
    t = np.arange(n) * dt
    d = displacement(t, scenario, cfg)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "dx", "dy", "dz"])
        for ti, di in zip(t, d):
            w.writerow([f"{ti:.6f}", *(repr(float(x)) for x in di)])
