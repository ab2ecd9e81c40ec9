"""Register a moving-scenario cloud and a second stationary cloud onto a stationary one.

This is a single-pair version of the batch protocol. Stationary pairs
differ only through hand placement. A moving sweep also carries the
residual tracking error, so its fitness is lower at every threshold.
"""
from trussim.reconstruction import reconstruct
from trussim.registration import RegistrationConfig, build_index, icp
from trussim.sweep import SweepConfig, run_sweep

cfg = SweepConfig()
reg = RegistrationConfig()
target = reconstruct(run_sweep("S", cfg, seed=0))
sources = {"S-S": reconstruct(run_sweep("S", cfg, seed=1)), "S-C": reconstruct(run_sweep("C", cfg, seed=2))}
tree = build_index(target)

print("pair  threshold  fitness   rmse    hausdorff  iterations")
for label, source in sources.items():
    for th in (0.4, 0.8, 1.2):
        r = icp(source, tree, th, reg.max_iter, reg.eps, sample_size=reg.sample_size)
        print(f"{label}   {th:4.1f} mm   {r.fitness:6.3f}  {r.inlier_rmse:6.3f}  {r.hausdorff:7.3f}    {r.iterations}")
