"""Motion compensation alone: no sweep, just the force loop following the phantom.

Prints the worst probe-phantom gap and the tracking delay for each motion
pattern and writes plot-ready traces (displacements and forces vs time).
"""
import sys
from pathlib import Path

import numpy as np

from trussim.experiment import cross_correlation_lag
from trussim.sweep import SweepConfig, force_deviation, initial_world, step

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)
cfg = SweepConfig()

for scenario in ("H", "V", "C"):
    world, _ = initial_world(scenario, cfg, seed=0)
    rows = []
    for _ in range(6000):  # 60 s
        world = step(world, cfg)
        rows.append([world.t, *world.phantom_pos, *world.probe_pos, *world.measured])
    data = np.array(rows)
    phantom = data[:, 1:4] - data[0, 1:4]
    probe = data[:, 4:7] - data[0, 4:7]
    gap = np.linalg.norm(probe - phantom, axis=1).max()
    axis = int(np.argmax(np.ptp(phantom, axis=0)))
    delay = cross_correlation_lag(phantom[:, axis], probe[:, axis], cfg.dt)
    worst = max(force_deviation(f, cfg) for f in data[:, 7:10])
    print(f"{scenario}: max gap {gap:.2f} mm, delay {delay:.2f} s, worst force deviation {worst:.2f} N")
    header = "t,phantom_x,phantom_y,phantom_z,probe_x,probe_y,probe_z,force_x,force_y,force_z"
    np.savetxt(out / f"compensation_{scenario}.csv", data, delimiter=",", header=header, comments="")
