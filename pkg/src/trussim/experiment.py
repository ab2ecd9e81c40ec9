"""Batch protocol: sweeps per scenario, pairwise registration, mean/std tables.

Stationary clouds are always the registration targets. Stationary pairs are
the unique unordered pairs of distinct sweeps (the later sweep is the
source); moving scenarios use the full cross product with every stationary
cloud. Since fitness is normalised by the source size, the direction
matters and is recorded in every pair report.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .config import config_to_dict
from .io import write_ply
from .motion import Scenario
from .reconstruction import reconstruct
from .registration import RegistrationConfig, RegistrationReport, build_index, icp, voxel_downsample
from .sweep import SimulationError, SweepConfig, SweepRecord, run_sweep

log = logging.getLogger(__name__)

METRICS = ("fitness", "inlier_rmse", "hausdorff")


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    scenarios: tuple[str, ...] = ("S", "H", "V", "C")
    sweeps_per_scenario: int = 5
    thresholds: tuple[float, ...] = (0.4, 0.6, 0.8, 1.0, 1.2)
    base_seed: int = 0
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        scen = tuple(Scenario.parse(s).value for s in self.scenarios)
        object.__setattr__(self, "scenarios", scen)
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if "S" in scen and self.sweeps_per_scenario < 2:
            raise ValueError("stationary pairs need at least two sweeps per scenario")
        if self.sweeps_per_scenario < 1:
            raise ValueError("sweeps_per_scenario must be positive")
        if any(t <= 0 for t in self.thresholds):
            raise ValueError("thresholds must be positive")

    def seeds(self) -> dict[str, list[int]]:
        n = self.sweeps_per_scenario
        return {s: [self.base_seed + i * n + j for j in range(n)] for i, s in enumerate(self.scenarios)}


@dataclass(frozen=True)
class PairJob:
    label: str  # e.g. "S-H"
    source: str  # cloud id, e.g. "H_0007"
    target: str


def cloud_id(scenario: str, seed: int) -> str:
    return f"{scenario}_{seed:04d}"


def plan_pairs(plan: ExperimentPlan) -> list[PairJob]:
    """Registration pairs in their canonical (reporting) order."""
    seeds = plan.seeds()
    if "S" not in seeds:
        return []
    targets = [cloud_id("S", s) for s in seeds["S"]]
    jobs = [PairJob("S-S", targets[j], targets[i]) for i, j in itertools.combinations(range(len(targets)), 2)]
    for scen in plan.scenarios:
        if scen == "S":
            continue
        for src_seed in seeds[scen]:
            for tgt in targets:
                jobs.append(PairJob(f"S-{scen}", cloud_id(scen, src_seed), tgt))
    return jobs


@dataclass
class AggregateRow:
    pair: str
    threshold: float
    n: int
    mean: dict[str, float]
    std: dict[str, float]


@dataclass
class AggregateTable:
    rows: list[AggregateRow] = field(default_factory=list)

    def get(self, pair: str, threshold: float) -> AggregateRow:
        for row in self.rows:
            if row.pair == pair and abs(row.threshold - threshold) < 1e-9:
                return row
        raise KeyError((pair, threshold))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pair", "threshold", "n", *(f"{m}_{s}" for m in METRICS for s in ("mean", "std"))])
            for r in self.rows:
                w.writerow([r.pair, r.threshold, r.n, *(repr(v) for m in METRICS for v in (r.mean[m], r.std[m]))])

    def to_markdown(self) -> str:
        lines = ["## Hausdorff distance [mm]", "", "| set pair | Hausdorff |", "|---|---|"]
        pairs = list(dict.fromkeys(r.pair for r in self.rows))
        thresholds = sorted({r.threshold for r in self.rows})
        ref = thresholds[len(thresholds) // 2] if thresholds else None
        for p in pairs:
            r = self.get(p, ref)
            lines.append(f"| {p} | {r.mean['hausdorff']:.3f} ± {r.std['hausdorff']:.3f} |")
        lines += ["", f"(Hausdorff after ICP at threshold {ref} mm.)", "", "## ICP registration", ""]
        lines += ["| set pair | fitness | RMSE [mm] | n |", "|---|---|---|---|"]
        for th in thresholds:
            lines.append(f"| **Threshold {th:g} mm** | | | |")
            for p in pairs:
                r = self.get(p, th)
                lines.append(
                    f"| {p} | {r.mean['fitness']:.3f} ± {r.std['fitness']:.3f} "
                    f"| {r.mean['inlier_rmse']:.3f} ± {r.std['inlier_rmse']:.3f} | {r.n} |"
                )
        return "\n".join(lines) + "\n"


def aggregate(results: list[tuple[PairJob, RegistrationReport]]) -> AggregateTable:
    """Mean and (population) standard deviation per set pair and threshold."""
    groups: dict[tuple[str, float], list[RegistrationReport]] = {}
    for job, rep in results:
        groups.setdefault((job.label, rep.threshold), []).append(rep)
    table = AggregateTable()
    for (pair, th), reps in groups.items():
        vals = {m: np.array([getattr(r, m) for r in reps]) for m in METRICS}
        table.rows.append(
            AggregateRow(pair, th, len(reps), {m: float(v.mean()) for m, v in vals.items()}, {m: float(v.std()) for m, v in vals.items()})
        )
    return table


def _sweep_job(args) -> tuple[str, SweepRecord, NDArray]:
    scen, seed, cfg = args
    try:
        record = run_sweep(scen, cfg, seed)
        cloud = reconstruct(record)
    except (SimulationError, ValueError) as exc:
        raise ExperimentError(f"sweep failed: scenario {scen}, seed {seed}: {exc}") from exc
    return cloud_id(scen, seed), record, cloud


def _register_group(args) -> list[RegistrationReport]:
    source, target, thresholds, reg = args
    tree = build_index(target)
    return [icp(source, tree, th, reg.max_iter, reg.eps, symmetric_hausdorff=reg.symmetric_hausdorff, sample_size=reg.sample_size) for th in thresholds]


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))  # map keeps submission order


def run_experiment(
    plan: ExperimentPlan,
    cfg: SweepConfig = SweepConfig(),
    reg: RegistrationConfig = RegistrationConfig(),
    write: bool = True,
) -> AggregateTable:
    """Run every sweep, register every pair at every threshold, aggregate.

    With ``write`` the output directory receives ``clouds/*.ply``,
    ``traces/*.csv``, ``pairs/*.json``, ``aggregate.csv`` and ``aggregate.md``.
    """
    out = Path(plan.output_dir)
    seeds = plan.seeds()
    sweep_jobs = [(scen, seed, cfg) for scen in plan.scenarios for seed in seeds[scen]]
    log.info("running %d sweeps", len(sweep_jobs))
    swept = _map(_sweep_job, sweep_jobs, plan.workers)
    clouds = {cid: cloud for cid, _, cloud in swept}
    if reg.voxel_size > 0:
        clouds = {cid: voxel_downsample(c, reg.voxel_size) for cid, c in clouds.items()}

    if write:
        (out / "clouds").mkdir(parents=True, exist_ok=True)
        (out / "traces").mkdir(parents=True, exist_ok=True)
        (out / "pairs").mkdir(parents=True, exist_ok=True)
        for cid, record, cloud in swept:
            write_ply(out / "clouds" / f"{cid}.ply", cloud)
            emit_traces(record, out / "traces")

    pairs = plan_pairs(plan)
    log.info("registering %d pairs at %d thresholds", len(pairs), len(plan.thresholds))
    # group by target so each k-d tree is built once per pair group
    reports = _map(_register_group, [(clouds[p.source], clouds[p.target], plan.thresholds, reg) for p in pairs], plan.workers)

    results = []
    snapshot = {"sweep": config_to_dict(cfg), "registration": reg.__dict__.copy()}
    for k, (job, reps) in enumerate(zip(pairs, reports)):
        for rep in reps:
            rep.extra.update(pair=job.label, source=job.source, target=job.target)
            results.append((job, rep))
        if write:
            doc = {
                "index": k,
                "pair": job.label,
                "source": str(Path("clouds") / f"{job.source}.ply"),
                "target": str(Path("clouds") / f"{job.target}.ply"),
                "config": snapshot,
                "reports": [{key: val for key, val in r.to_dict().items() if key != "extra"} for r in reps],
            }
            (out / "pairs" / f"{k:04d}_{job.label}_{job.source}_to_{job.target}.json").write_text(json.dumps(doc, indent=2))

    table = aggregate(results)
    if write:
        table.to_csv(out / "aggregate.csv")
        (out / "aggregate.md").write_text(table.to_markdown())
    return table


def load_pair_reports(out_dir: str | Path) -> list[tuple[PairJob, RegistrationReport]]:
    """Re-read ``pairs/*.json`` (used to recompute aggregates independently)."""
    results = []
    for path in sorted(Path(out_dir, "pairs").glob("*.json")):
        doc = json.loads(path.read_text())
        job = PairJob(doc["pair"], Path(doc["source"]).stem, Path(doc["target"]).stem)
        for r in doc["reports"]:
            results.append((job, RegistrationReport.from_dict(r)))
    return results


# --------------------------------------------------------------------------
# compensation traces


def emit_traces(record: SweepRecord, out_dir: str | Path) -> Path:
    """Write one CSV per sweep with phantom and probe displacement and force vs time.

    Positions are relative to their initial values in world coordinates;
    forces are the measured TCP-frame forces. One row per control step.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{cloud_id(record.scenario.value, record.seed)}.csv"
        phantom = record.phantom_trace - record.phantom_trace[0]
        probe = record.probe_trace - record.probe_trace[0]
        data = np.column_stack([record.times, phantom, probe, record.forces, record.phi_trace])
        header = "t,phantom_x,phantom_y,phantom_z,probe_x,probe_y,probe_z,force_x,force_y,force_z,phi"
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
    except OSError as exc:
        raise OSError(f"cannot write traces to {out}: {exc}") from exc
    return path


def tracking_gap(record: SweepRecord) -> NDArray[np.float64]:
    """Distance between probe and phantom displacements at every step (mm)."""
    probe = record.probe_trace - record.probe_trace[0]
    phantom = record.phantom_trace - record.phantom_trace[0]
    return np.linalg.norm(probe - phantom, axis=1)


def tracking_delay(record: SweepRecord, axis: int | None = None, max_lag: float = 2.0) -> float:
    """Lag (s) maximising the cross-correlation of phantom and probe motion.

    ``axis`` defaults to the world axis along which the phantom moves most.
    """
    probe = record.probe_trace - record.probe_trace[0]
    phantom = record.phantom_trace - record.phantom_trace[0]
    if axis is None:
        axis = int(np.argmax(np.ptp(phantom, axis=0)))
    return cross_correlation_lag(phantom[:, axis], probe[:, axis], record.config.dt, max_lag)


def cross_correlation_lag(reference: NDArray, follower: NDArray, dt: float, max_lag: float = 2.0) -> float:
    """Non-negative delay of ``follower`` behind ``reference`` (s).

    The step-to-step increments are correlated rather than the positions:
    the motion comes in short bursts separated by long still phases, and
    position plateaus would otherwise dominate the correlation.
    """
    a = np.diff(np.asarray(reference, dtype=np.float64))
    b = np.diff(np.asarray(follower, dtype=np.float64))
    n = len(a)
    if n == 0 or not a.any() or not b.any():
        return 0.0
    lags = np.arange(0, min(int(round(max_lag / dt)), n - 1) + 1)
    scores = np.array([np.dot(a[: n - k], b[k:]) for k in lags])
    return float(lags[int(np.argmax(scores))] * dt)
