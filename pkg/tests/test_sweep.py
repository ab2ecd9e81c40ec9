import math
from dataclasses import replace

import numpy as np
import pytest

from trussim import motion
from trussim.config import config_to_dict
from trussim.control import PidConfig
from trussim.experiment import cross_correlation_lag, tracking_gap
from trussim.motion import PERIOD
from trussim.phantom import probe_pose_in_phantom, slice_contour
from trussim.segmentation import segment
from trussim.sweep import (
    ForceLimitExceeded,
    SimulationError,
    SweepConfig,
    SweepPhase,
    SweepTimeout,
    force_deviation,
    goto_slice,
    initial_world,
    load_record,
    run_sweep,
    save_record,
    step,
)


def compensate(cfg, scenario, seconds, seed=0):
    world, _ = initial_world(scenario, cfg, seed)
    probe, phantom, dev = [world.probe_pos], [world.phantom_pos], []
    for _ in range(int(round(seconds / cfg.dt))):
        world = step(world, cfg)
        probe.append(world.probe_pos)
        phantom.append(world.phantom_pos)
        dev.append(force_deviation(world.force, cfg))
    return np.array(probe), np.array(phantom), np.array(dev), world


def test_zero_command_step_kinematics():
    cfg = SweepConfig(pid=PidConfig(kp=0.0, ki=0.0, kd=0.0), force_noise=0.0, abort_force=1e3)
    world, _ = initial_world("C", cfg, 0)
    world = replace(world, step_index=499, t=4.99, phantom_pos=motion.displacement(4.99, "C"))
    new = step(world, cfg)
    np.testing.assert_array_equal(new.probe_pos, world.probe_pos)
    np.testing.assert_allclose(new.phantom_pos - world.phantom_pos, motion.displacement(5.0, "C") - motion.displacement(4.99, "C"), atol=1e-12)
    assert new.t == pytest.approx(5.0)


def test_stationary_equilibrium_holds(default_cfg):
    probe, _, dev, _ = compensate(default_cfg, "S", 30.0)
    k = default_cfg.phantom.stiffness[0]
    assert np.max(np.linalg.norm(probe - probe[0], axis=1)) <= default_cfg.pid.deadzone / k
    assert np.max(dev) < default_cfg.pid.deadzone


def test_vertical_burst_tracking(default_cfg):
    probe, phantom, _, _ = compensate(default_cfg, "V", PERIOD * 1.2)
    gap = np.linalg.norm((probe - probe[0]) - (phantom - phantom[0]), axis=1)
    lag = cross_correlation_lag(phantom[:, 2] - phantom[0, 2], probe[:, 2] - probe[0, 2], default_cfg.dt)
    assert gap.max() <= 3.0
    assert 0.0 < lag <= 0.6


def test_illegal_transition():
    world, _ = initial_world("S", SweepConfig(), 0)
    with pytest.raises(SimulationError):
        world.with_phase(SweepPhase.RECORDING)


def test_steps_per_slice_validation():
    assert SweepConfig().steps_per_slice == 5
    with pytest.raises(ValueError):
        SweepConfig(slice_step=0.0037).steps_per_slice


def _presence_extent(record, sign):
    """Relative roll at which the gland leaves the image, by bisection."""
    cfg = record.config
    pose = probe_pose_in_phantom(cfg.phantom, record.init_probe_pos, record.init_phantom_pos)

    def present(phi_rel):
        c = slice_contour(cfg.phantom, pose, record.roll_offset + phi_rel, 256, cfg.probe_radius, cfg.image)
        return segment(c, cfg.image, cfg.min_area).present

    lo, hi = 0.0, 1.5
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if present(sign * mid) else (lo, mid)
    return sign * lo


def test_stationary_sweep_covers_the_gland(s_record):
    lo, hi = s_record.phi_range
    assert hi == pytest.approx(_presence_extent(s_record, +1), abs=0.05)
    assert lo == pytest.approx(_presence_extent(s_record, -1), abs=0.05)
    assert abs(hi + lo) < 0.05
    assert s_record.pause_events == []
    assert 20.0 <= s_record.duration <= 60.0


def test_recording_roll_is_monotone(s_record, c_record):
    for rec in (s_record, c_record):
        phis = np.array([s.phi for s in rec.slices])
        assert np.all(np.diff(phis) < 0)


def test_roll_is_frozen_while_paused(c_record):
    assert c_record.pause_events
    t = c_record.times
    for start, end in c_record.pause_events:
        inside = (t >= start) & (t <= end)
        assert np.ptp(c_record.phi_trace[inside]) == 0.0


def test_combined_motion_pauses_every_burst(c_record, s_record):
    rec_start = min(s.t for s in c_record.slices)
    rec_end = max(s.t for s in c_record.slices)
    k = 0
    checked = 0
    while PERIOD * (k + 0.75) < rec_end:
        b0, b1 = PERIOD * (k + 0.75), PERIOD * (k + 1)
        if b0 >= rec_start and b1 <= rec_end:
            assert any(s < b1 and e > b0 for s, e in c_record.pause_events), f"no pause in burst {k}"
            checked += 1
        k += 1
    assert checked >= 1
    n_c, n_s = len(c_record.present_slices), len(s_record.present_slices)
    assert abs(n_c - n_s) <= 0.1 * n_s


def test_records_are_deterministic(default_cfg, s_record):
    again = run_sweep("S", default_cfg, seed=1)
    np.testing.assert_array_equal(again.forces, s_record.forces)
    np.testing.assert_array_equal(again.probe_trace, s_record.probe_trace)
    assert [s.phi for s in again.slices] == [s.phi for s in s_record.slices]
    for a, b in zip(again.slices, s_record.slices):
        np.testing.assert_array_equal(a.seg.contour, b.seg.contour)


def test_seeds_change_placement(default_cfg, s_record):
    other, _ = initial_world("S", default_cfg, 2)
    assert other.roll_offset != s_record.roll_offset


def test_goto_slice(c_record):
    cfg = c_record.config
    world = c_record.final_state
    bounds = c_record.phi_range
    same = goto_slice(world, world.probe_phi, cfg, bounds=None)
    assert same.t == world.t and same.probe_phi == world.probe_phi
    trace = []
    target = world.probe_phi + 0.3
    arrived = goto_slice(world, target, cfg, trace=trace)
    assert arrived.probe_phi == target
    assert arrived.t - world.t == pytest.approx(3.0, abs=2 * cfg.dt)
    assert arrived.phase is SweepPhase.DONE
    worst = max(force_deviation(f, cfg) for _, f in trace)
    assert worst <= cfg.pause_threshold + 2.0
    with pytest.raises(ValueError):
        goto_slice(world, bounds[1] + 1.0, cfg, bounds=bounds)


def test_timeout_and_force_abort():
    with pytest.raises(SweepTimeout):
        run_sweep("S", SweepConfig(max_duration=5.0), seed=0)
    with pytest.raises(ForceLimitExceeded):
        run_sweep("V", SweepConfig(abort_force=7.5), seed=0)


def test_record_round_trip(tmp_path, c_record):
    save_record(c_record, tmp_path / "rec")
    back = load_record(tmp_path / "rec")
    assert back.scenario == c_record.scenario and back.seed == c_record.seed
    assert config_to_dict(back.config) == config_to_dict(c_record.config)
    np.testing.assert_array_equal(back.times, c_record.times)
    np.testing.assert_array_equal(back.forces, c_record.forces)
    np.testing.assert_array_equal(back.probe_trace, c_record.probe_trace)
    assert back.pause_events == c_record.pause_events
    assert len(back.slices) == len(c_record.slices)
    for a, b in zip(back.slices, c_record.slices):
        assert a.phi == b.phi and a.seg.present == b.seg.present
        np.testing.assert_array_equal(a.seg.contour, b.seg.contour)


def test_tracking_gap_definition(c_record):
    gap = tracking_gap(c_record)
    assert gap[0] == 0.0
    assert 0.0 < gap.max() <= 3.0
