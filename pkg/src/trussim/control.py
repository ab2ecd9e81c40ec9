"""PID force controller with a deadzone, and a noisy force sensor.

The controller acts on the TCP y and z forces and outputs TCP-frame probe
velocities (mm/s). The x command is always zero: the axial position is set
by visual positioning, not by force.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray


@dataclass(frozen=True)
class PidConfig:
    """Gains are per axis, ordered (y, z).

    ``kp`` in mm/s per N, ``ki`` in mm/s per N*s, ``kd`` in mm/s per N/s.
    ``lowpass`` is the smoothing factor of an optional single-pole filter on
    the measured force (0 disables it).
    """

    kp: tuple[float, float] = (2.5, 2.5)
    ki: tuple[float, float] = (1.5, 1.5)
    kd: tuple[float, float] = (0.02, 0.02)
    deadzone: float = 0.1
    f_ref: tuple[float, float] = (7.0, 0.0)
    integrator_limit: float = 15.0
    output_limit: float = 25.0
    lowpass: float = 0.0

    def __post_init__(self):
        for name in ("kp", "ki", "kd", "f_ref"):
            val = getattr(self, name)
            if np.ndim(val) == 0:
                val = (val, val)
            object.__setattr__(self, name, tuple(float(v) for v in val))
        if self.deadzone < 0:
            raise ValueError("deadzone must be non-negative")
        if self.integrator_limit <= 0 or self.output_limit <= 0:
            raise ValueError("integrator and output limits must be positive")
        if not 0.0 <= self.lowpass < 1.0:
            raise ValueError("lowpass factor must lie in [0, 1)")


@dataclass(frozen=True)
class PidState:
    integral: NDArray[np.float64] = field(default_factory=lambda: np.zeros(2))
    prev_error: NDArray[np.float64] = field(default_factory=lambda: np.zeros(2))
    last_command: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    filtered: NDArray[np.float64] | None = None


@dataclass(frozen=True)
class ForceMeasurement:
    f: NDArray[np.float64]
    noise_sigma: float


def measure_force(true_force: ArrayLike, sigma: float, rng: np.random.Generator | None = None) -> ForceMeasurement:
    """Add independent zero-mean Gaussian noise to each axis.

    With ``sigma == 0`` the input is returned unchanged and ``rng`` is not
    touched.
    """
    f = np.asarray(true_force, dtype=np.float64).copy()
    if sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    if sigma > 0:
        if rng is None:
            raise ValueError("a random generator is required when sigma > 0")
        f = f + rng.normal(0.0, sigma, size=3)
    return ForceMeasurement(f, float(sigma))


def pid_step(state: PidState, measured: ArrayLike, cfg: PidConfig, dt: float) -> tuple[NDArray[np.float64], PidState]:
    """One control update; returns the TCP velocity command and the new state.

    An axis whose error is inside the deadzone outputs zero and its
    integrator holds its value (it is not reset), so the probe rests while
    the force is close enough to the reference.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f_yz = np.asarray(measured, dtype=np.float64)[1:3]
    filtered = None
    if cfg.lowpass > 0:
        prev = f_yz if state.filtered is None else state.filtered
        f_yz = cfg.lowpass * prev + (1.0 - cfg.lowpass) * f_yz
        filtered = f_yz

    kp, ki, kd = (np.asarray(g) for g in (cfg.kp, cfg.ki, cfg.kd))
    e = np.asarray(cfg.f_ref) - f_yz
    active = np.abs(e) >= cfg.deadzone
    e = np.where(active, e, 0.0)

    integral = np.where(active, state.integral + e * dt, state.integral)
    with np.errstate(divide="ignore"):
        i_max = np.where(ki > 0, cfg.integrator_limit / ki, np.inf)
    integral = np.clip(integral, -i_max, i_max)

    derivative = (e - state.prev_error) / dt
    u = np.where(active, kp * e + ki * integral + kd * derivative, 0.0)
    norm = np.hypot(u[0], u[1])
    if norm > cfg.output_limit:
        u = u * (cfg.output_limit / norm)
    command = np.array([0.0, u[0], u[1]])
    return command, PidState(integral, e, command, filtered)


def reset(state: PidState) -> PidState:
    return replace(state, integral=np.zeros(2), prev_error=np.zeros(2))
