"""Closed-loop scanning simulation.

A fixed-step world (phantom motion, spring contact, noisy force sensing and
the PID compensator) drives the sweep state machine: place the probe, roll
towards one edge of the gland until it disappears, reverse, and record
slices on the way to the other edge. Recording holds the roll angle while
the contact force is off its reference; compensation never stops.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from . import motion
from .control import PidConfig, PidState, measure_force, pid_step
from .geometry import Transform, compose, make_transform, rotation_x, translation
from .motion import MotionConfig, Scenario
from .phantom import (
    TCP_ROTATION,
    PhantomModel,
    contact_force,
    equilibrium_probe_position,
    probe_pose_in_phantom,
    slice_contour,
)
from .segmentation import ImageSpec, NoProstateInView, SegmentationResult, read_contour_csv, segment, visual_offset, write_contour_csv


class SimulationError(RuntimeError):
    pass


class ForceLimitExceeded(SimulationError):
    pass


class SweepTimeout(SimulationError):
    pass


class SweepPhase(str, enum.Enum):
    INIT = "Init"
    FIND_EDGE = "FindEdge"
    RECORDING = "Recording"
    PAUSED = "Paused"
    DONE = "Done"
    GOTO_SLICE = "GotoSlice"


_ALLOWED = {
    SweepPhase.INIT: {SweepPhase.INIT, SweepPhase.FIND_EDGE},
    SweepPhase.FIND_EDGE: {SweepPhase.FIND_EDGE, SweepPhase.RECORDING},
    SweepPhase.RECORDING: {SweepPhase.RECORDING, SweepPhase.PAUSED, SweepPhase.DONE},
    SweepPhase.PAUSED: {SweepPhase.PAUSED, SweepPhase.RECORDING},
    SweepPhase.DONE: {SweepPhase.DONE, SweepPhase.GOTO_SLICE},
    SweepPhase.GOTO_SLICE: {SweepPhase.GOTO_SLICE, SweepPhase.DONE},
}


@dataclass(frozen=True)
class SweepConfig:
    phantom: PhantomModel = field(default_factory=PhantomModel)
    motion: MotionConfig = field(default_factory=MotionConfig)
    pid: PidConfig = field(default_factory=PidConfig)
    image: ImageSpec = field(default_factory=ImageSpec)
    dt: float = 0.01
    probe_radius: float = 9.0
    rotation_speed: float = 0.1  # rad/s
    slice_step: float = 0.005  # rad between saved slices
    pause_threshold: float = 3.0  # N, deviation from the reference force
    abort_force: float = 15.0  # N, magnitude
    max_duration: float = 120.0  # s
    edge_debounce: int = 3  # consecutive background frames that mark an edge
    force_noise: float = 0.02  # N
    n_contour: int = 1600
    min_area: float = 10.0  # mm^2
    contour_jitter: float = 0.0  # mm
    placement_axial: float = 2.0  # mm, half-range of the hand-placement error
    placement_roll: float = 0.01  # rad, half-range of the hand-placement error
    keep_masks: bool = False
    phantom_origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def steps_per_slice(self) -> int:
        n = self.slice_step / (self.rotation_speed * self.dt)
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError("slice_step must be a whole number of rotation steps")
        return int(round(n))

    @property
    def f_ref(self) -> NDArray[np.float64]:
        return np.array([0.0, *self.pid.f_ref])


@dataclass(frozen=True)
class WorldState:
    t: float
    probe_pos: NDArray[np.float64]
    probe_phi: float  # roll relative to the initial (central) slice
    phantom_pos: NDArray[np.float64]
    pid: PidState
    phase: SweepPhase
    scenario: Scenario
    roll_offset: float = 0.0  # absolute roll of the initial slice
    force: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    measured: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    command: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    step_index: int = 0
    rng: np.random.Generator | None = None

    def with_phase(self, phase: SweepPhase) -> "WorldState":
        if phase not in _ALLOWED[self.phase]:
            raise SimulationError(f"illegal phase transition {self.phase.value} -> {phase.value}")
        return replace(self, phase=phase)


@dataclass(frozen=True)
class SliceRecord:
    phi: float
    t: float
    seg: SegmentationResult


@dataclass
class SweepRecord:
    scenario: Scenario
    seed: int
    config: SweepConfig
    slices: list[SliceRecord]
    times: NDArray[np.float64]
    forces: NDArray[np.float64]  # measured, TCP frame
    true_forces: NDArray[np.float64]
    commands: NDArray[np.float64]
    probe_trace: NDArray[np.float64]
    phantom_trace: NDArray[np.float64]
    phi_trace: NDArray[np.float64]
    pause_events: list[tuple[float, float]]
    roll_offset: float
    init_probe_pos: NDArray[np.float64]
    init_phantom_pos: NDArray[np.float64]
    final_state: WorldState | None = None

    @property
    def present_slices(self) -> list[SliceRecord]:
        return [s for s in self.slices if s.seg.present]

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def phi_range(self) -> tuple[float, float]:
        phis = [s.phi for s in self.present_slices]
        return min(phis), max(phis)

    def reconstruction_to_phantom(self) -> Transform:
        """Map reconstruction-frame points into the phantom frame at t = 0."""
        image = self.config.image
        recon_to_tcp = compose(translation(-image.center_u), make_transform(rotation_x(self.roll_offset)))
        pose = probe_pose_in_phantom(self.config.phantom, self.init_probe_pos, self.init_phantom_pos)
        return compose(pose, recon_to_tcp)


def _check_finite(world: WorldState) -> None:
    for name in ("probe_pos", "phantom_pos", "force", "command"):
        if not np.all(np.isfinite(getattr(world, name))):
            raise SimulationError(f"non-finite {name} at t={world.t:.3f} s")
    if not math.isfinite(world.probe_phi):
        raise SimulationError(f"non-finite probe roll at t={world.t:.3f} s")


def step(world: WorldState, cfg: SweepConfig, omega: float = 0.0) -> WorldState:
    """Advance the world by one control period.

    The phantom moves to its scheduled position, the contact force is sensed,
    the PID produces a TCP velocity command and the probe integrates it with
    explicit Euler. ``omega`` (rad/s) rolls the probe during the step.
    """
    _check_finite(world)
    n = world.step_index + 1
    t = n * cfg.dt
    origin = np.asarray(cfg.phantom_origin, dtype=np.float64)
    phantom_pos = origin + motion.displacement(t, world.scenario, cfg.motion)
    phantom_vel = motion.velocity(t, world.scenario, cfg.motion)
    probe_vel = TCP_ROTATION @ world.command

    force = contact_force(cfg.phantom, world.probe_pos, probe_vel, phantom_pos, phantom_vel)
    measured = measure_force(force, cfg.force_noise, world.rng).f
    command, pid = pid_step(world.pid, measured, cfg.pid, cfg.dt)
    probe_pos = world.probe_pos + (TCP_ROTATION @ command) * cfg.dt

    new = replace(
        world,
        t=t,
        step_index=n,
        probe_pos=probe_pos,
        probe_phi=world.probe_phi + omega * cfg.dt,
        phantom_pos=phantom_pos,
        pid=pid,
        force=force,
        measured=measured,
        command=command,
    )
    _check_finite(new)
    if np.linalg.norm(force) > cfg.abort_force:
        raise ForceLimitExceeded(f"contact force {np.linalg.norm(force):.2f} N exceeds {cfg.abort_force} N at t={t:.2f} s")
    return new


def force_deviation(force: NDArray[np.float64], cfg: SweepConfig) -> float:
    return float(np.linalg.norm(np.asarray(force)[1:3] - np.asarray(cfg.pid.f_ref)))


def image_slice(world: WorldState, cfg: SweepConfig, rng: np.random.Generator | None = None) -> SegmentationResult:
    """Ground-truth section at the current probe pose, passed through the segmenter."""
    pose = probe_pose_in_phantom(cfg.phantom, world.probe_pos, world.phantom_pos)
    contour = slice_contour(
        cfg.phantom, pose, world.roll_offset + world.probe_phi, cfg.n_contour, cfg.probe_radius, cfg.image
    )
    seg = segment(contour, cfg.image, cfg.min_area, cfg.contour_jitter, rng)
    return seg if cfg.keep_masks else seg.without_mask()


def initial_world(scenario: Scenario | str, cfg: SweepConfig, seed: int) -> tuple[WorldState, np.random.Generator]:
    """Hand placement followed by one visual-positioning correction along the probe.

    Returns the world and the generator reserved for segmentation jitter.
    """
    scenario = Scenario.parse(scenario)
    placement, sensor, jitter = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    axial = placement.uniform(-cfg.placement_axial, cfg.placement_axial)
    roll = placement.uniform(-cfg.placement_roll, cfg.placement_roll)
    origin = np.asarray(cfg.phantom_origin, dtype=np.float64)
    probe = equilibrium_probe_position(cfg.phantom, origin, cfg.pid.f_ref[0], axial=axial)
    world = WorldState(
        t=0.0,
        probe_pos=probe,
        probe_phi=0.0,
        phantom_pos=origin.copy(),
        pid=PidState(),
        phase=SweepPhase.INIT,
        scenario=scenario,
        roll_offset=roll,
        rng=sensor,
    )
    force = contact_force(cfg.phantom, probe, np.zeros(3), origin)
    world = replace(world, force=force, measured=force.copy())
    seg = image_slice(world, cfg, jitter)
    shift = visual_offset(seg, cfg.image)
    world = replace(world, probe_pos=probe + np.array([shift, 0.0, 0.0]))
    return world, jitter


class _Recorder:
    def __init__(self):
        self.times, self.forces, self.true_forces, self.commands = [], [], [], []
        self.probe, self.phantom, self.phi = [], [], []

    def log(self, w: WorldState):
        self.times.append(w.t)
        self.forces.append(w.measured)
        self.true_forces.append(w.force)
        self.commands.append(w.command)
        self.probe.append(w.probe_pos)
        self.phantom.append(w.phantom_pos)
        self.phi.append(w.probe_phi)


def run_sweep(scenario: Scenario | str, cfg: SweepConfig = SweepConfig(), seed: int = 0) -> SweepRecord:
    """Simulate one complete sweep and return everything it recorded."""
    world, jitter = initial_world(scenario, cfg, seed)
    init_probe, init_phantom = world.probe_pos.copy(), world.phantom_pos.copy()
    rec = _Recorder()
    rec.log(world)
    per_slice = cfg.steps_per_slice
    omega = cfg.rotation_speed
    max_steps = int(math.ceil(cfg.max_duration / cfg.dt))

    def advance(w: WorldState, rate: float) -> WorldState:
        if w.step_index >= max_steps:
            raise SweepTimeout(f"sweep exceeded {cfg.max_duration} s (scenario {w.scenario.value}, seed {seed})")
        w = step(w, cfg, rate)
        rec.log(w)
        return w

    # roll towards the first edge until the gland leaves the image
    world = world.with_phase(SweepPhase.FIND_EDGE)
    absent = 0
    k = 0
    while True:
        if k % per_slice == 0:
            absent = 0 if image_slice(world, cfg, jitter).present else absent + 1
            if absent >= cfg.edge_debounce:
                break
        world = advance(world, omega)
        k += 1

    # recording pass in the opposite direction
    world = world.with_phase(SweepPhase.RECORDING)
    slices: list[SliceRecord] = []
    pauses: list[tuple[float, float]] = []
    pause_start = None
    seen, absent, k = False, 0, 0
    while True:
        if force_deviation(world.measured, cfg) > cfg.pause_threshold:
            if pause_start is None:
                pause_start = world.t
                world = world.with_phase(SweepPhase.PAUSED)
            world = advance(world, 0.0)
            continue
        if pause_start is not None:
            pauses.append((pause_start, world.t))
            pause_start = None
            world = world.with_phase(SweepPhase.RECORDING)
        if k % per_slice == 0:
            seg = image_slice(world, cfg, jitter)
            slices.append(SliceRecord(world.probe_phi, world.t, seg))
            if seg.present:
                seen, absent = True, 0
            else:
                absent += 1
            if seen and absent >= cfg.edge_debounce:
                break
        world = advance(world, -omega)
        k += 1
    world = world.with_phase(SweepPhase.DONE)
    if not seen:
        raise NoProstateInView(f"no prostate in view during the recording pass (seed {seed})")

    return SweepRecord(
        scenario=world.scenario,
        seed=seed,
        config=cfg,
        slices=slices,
        times=np.array(rec.times),
        forces=np.array(rec.forces),
        true_forces=np.array(rec.true_forces),
        commands=np.array(rec.commands),
        probe_trace=np.array(rec.probe),
        phantom_trace=np.array(rec.phantom),
        phi_trace=np.array(rec.phi),
        pause_events=pauses,
        roll_offset=world.roll_offset,
        init_probe_pos=init_probe,
        init_phantom_pos=init_phantom,
        final_state=world,
    )


def goto_slice(
    world: WorldState,
    phi_target: float,
    cfg: SweepConfig,
    bounds: tuple[float, float] | None = None,
    trace: list | None = None,
) -> WorldState:
    """Roll to ``phi_target`` at the sweep speed while compensation stays on.

    ``bounds`` is the recorded roll range; targets outside it are rejected.
    When ``trace`` is a list, ``(t, measured_force)`` is appended each step.
    """
    if bounds is not None and not (bounds[0] <= phi_target <= bounds[1]):
        raise ValueError(f"target roll {phi_target:.4f} rad outside the recorded range {bounds}")
    if world.phase is not SweepPhase.GOTO_SLICE:
        world = world.with_phase(SweepPhase.GOTO_SLICE)
    max_dphi = cfg.rotation_speed * cfg.dt
    while world.probe_phi != phi_target:
        remaining = phi_target - world.probe_phi
        dphi = math.copysign(min(abs(remaining), max_dphi), remaining)
        world = step(world, cfg, dphi / cfg.dt)
        if abs(phi_target - world.probe_phi) < 1e-12 or abs(dphi) < max_dphi:
            world = replace(world, probe_phi=phi_target)
        if trace is not None:
            trace.append((world.t, world.measured.copy()))
        if world.t > cfg.max_duration:
            raise SweepTimeout("goto_slice did not reach its target in time")
    return world.with_phase(SweepPhase.DONE)


# --------------------------------------------------------------------------
# record directory format


def save_record(record: SweepRecord, out_dir: str | Path, config_snapshot: dict | None = None) -> Path:
    """Write ``meta.json``, ``slices.csv``, ``forces.csv``, ``trajectory.csv`` and contours."""
    from .config import config_to_dict

    out = Path(out_dir)
    (out / "contours").mkdir(parents=True, exist_ok=True)
    meta = {
        "scenario": record.scenario.value,
        "seed": record.seed,
        "roll_offset": record.roll_offset,
        "init_probe_pos": record.init_probe_pos.tolist(),
        "init_phantom_pos": record.init_phantom_pos.tolist(),
        "pause_events": [list(p) for p in record.pause_events],
        "config": config_snapshot if config_snapshot is not None else config_to_dict(record.config),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    with open(out / "slices.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "t", "phi", "present", "area", "centroid_u", "centroid_v"])
        for i, s in enumerate(record.slices):
            cu, cv = s.seg.centroid if s.seg.centroid is not None else ("", "")
            w.writerow([i, repr(s.t), repr(s.phi), int(s.seg.present), repr(s.seg.area), cu, cv])
            if s.seg.present:
                write_contour_csv(out / "contours" / f"slice_{i:04d}.csv", s.seg.contour)
    with open(out / "forces.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "fx", "fy", "fz", "true_fx", "true_fy", "true_fz", "cmd_x", "cmd_y", "cmd_z"])
        for row in np.column_stack([record.times, record.forces, record.true_forces, record.commands]):
            w.writerow([repr(float(x)) for x in row])
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "phi", "probe_x", "probe_y", "probe_z", "phantom_x", "phantom_y", "phantom_z"])
        for row in np.column_stack([record.times, record.phi_trace, record.probe_trace, record.phantom_trace]):
            w.writerow([repr(float(x)) for x in row])
    return out


def load_record(out_dir: str | Path) -> SweepRecord:
    """Read a record directory written by :func:`save_record` (masks are not stored)."""
    from .config import config_from_dict

    out = Path(out_dir)
    meta = json.loads((out / "meta.json").read_text())
    cfg = config_from_dict(meta["config"])
    slices = []
    with open(out / "slices.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            i = int(row["index"])
            if int(row["present"]):
                contour = read_contour_csv(out / "contours" / f"slice_{i:04d}.csv")
                centroid = (float(row["centroid_u"]), float(row["centroid_v"]))
                seg = SegmentationResult(True, None, contour, centroid, float(row["area"]))
            else:
                seg = SegmentationResult(False, None, np.empty((0, 2)), None, 0.0)
            slices.append(SliceRecord(float(row["phi"]), float(row["t"]), seg))
    forces = np.loadtxt(out / "forces.csv", delimiter=",", skiprows=1, ndmin=2)
    traj = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1, ndmin=2)
    return SweepRecord(
        scenario=Scenario.parse(meta["scenario"]),
        seed=int(meta["seed"]),
        config=cfg,
        slices=slices,
        times=traj[:, 0],
        forces=forces[:, 1:4],
        true_forces=forces[:, 4:7],
        commands=forces[:, 7:10],
        probe_trace=traj[:, 2:5],
        phantom_trace=traj[:, 5:8],
        phi_trace=traj[:, 1],
        pause_events=[tuple(p) for p in meta["pause_events"]],
        roll_offset=float(meta["roll_offset"]),
        init_probe_pos=np.array(meta["init_probe_pos"]),
        init_phantom_pos=np.array(meta["init_phantom_pos"]),
    )
