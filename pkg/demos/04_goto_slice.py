"""After a sweep, roll back to a chosen slice for needle placement while the phantom keeps moving.

Compensation stays on during the roll. The force trace shows how far the
load strays from the 7 N reference on the way.
"""
from trussim.sweep import SweepConfig, force_deviation, goto_slice, run_sweep

cfg = SweepConfig()
record = run_sweep("C", cfg, seed=4)
lo, hi = record.phi_range
target = 0.5 * (lo + hi) + 0.2
trace = []
world = goto_slice(record.final_state, target, cfg, bounds=(lo, hi), trace=trace)

worst = max(force_deviation(f, cfg) for _, f in trace)
print(f"recorded roll range [{lo:+.3f}, {hi:+.3f}] rad")
print(f"reached {world.probe_phi:+.3f} rad after {world.t - record.final_state.t:.2f} s, worst force deviation {worst:.2f} N")
