"""Command-line entry point.

::

    trussim [--config FILE] [--seed N] [--out PATH] <command> ...

    sweep        one sweep; writes a record directory
    reconstruct  record directory -> point cloud (.ply or .xyz)
    register     ICP of a source cloud onto a target cloud at one or more thresholds
    experiment   the full batch protocol (clouds, pair reports, aggregate tables)
    traces       compensation traces (displacement and force vs time) as CSV

The global flags may be given before or after the command name. The exit
status is 0 only when every job succeeded.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .experiment import ExperimentError, emit_traces, run_experiment
from .io import read_cloud
from .reconstruction import export_cloud, reconstruct
from .registration import icp
from .sweep import SimulationError, load_record, run_sweep, save_record

log = logging.getLogger("trussim")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="FILE", default=default, help="INI configuration file")
    p.add_argument("--seed", type=int, default=default, help="random seed (base seed for experiment)")
    p.add_argument("--out", metavar="PATH", default=default, help="output file or directory")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trussim", description="Simulated robotic TRUS sweeps, reconstruction and registration.", parents=[_global_flags(False)])
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_flags(True)]

    p = sub.add_parser("sweep", parents=common, help="simulate one sweep")
    p.add_argument("--scenario", default="S", help="S, H, V or C")
    p.add_argument("--cloud", action="store_true", help="also write the reconstructed cloud")

    p = sub.add_parser("reconstruct", parents=common, help="reconstruct a recorded sweep")
    p.add_argument("record", help="record directory written by 'sweep'")
    p.add_argument("--format", choices=("ply", "xyz"), default=None)

    p = sub.add_parser("register", parents=common, help="register two clouds")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--threshold", type=float, action="append", help="correspondence threshold in mm (repeatable)")

    sub.add_parser("experiment", parents=common, help="run the batch protocol")

    p = sub.add_parser("traces", parents=common, help="write compensation traces")
    p.add_argument("--scenario", default="C", help="scenario to simulate when no record is given")
    p.add_argument("--record", default=None, help="existing record directory")
    return parser


def _cmd_sweep(args, cfg, reg, plan) -> None:
    seed = args.seed if args.seed is not None else plan.base_seed
    record = run_sweep(args.scenario, cfg, seed)
    out = Path(args.out or f"sweep_{record.scenario.value}_{seed:04d}")
    save_record(record, out)
    if args.cloud:
        export_cloud(reconstruct(record), out / "cloud.ply")
    print(f"{record.scenario.value} seed {seed}: {len(record.present_slices)} slices, "
          f"{record.duration:.2f} s, {len(record.pause_events)} pauses -> {out}")


def _cmd_reconstruct(args, cfg, reg, plan) -> None:
    record = load_record(args.record)
    cloud = reconstruct(record)
    fmt = args.format or "ply"
    out = Path(args.out) if args.out else Path(args.record) / f"cloud.{fmt}"
    export_cloud(cloud, out, args.format)
    print(f"{len(cloud)} points -> {out}")


def _cmd_register(args, cfg, reg, plan) -> None:
    source, target = read_cloud(args.source), read_cloud(args.target)
    thresholds = args.threshold or list(plan.thresholds)
    reports = [
        icp(source, target, th, reg.max_iter, reg.eps, symmetric_hausdorff=reg.symmetric_hausdorff, sample_size=reg.sample_size)
        for th in thresholds
    ]
    doc = {"source": args.source, "target": args.target, "reports": [r.to_dict() for r in reports]}
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2))
    for r in reports:
        print(f"threshold {r.threshold:.2f} mm: fitness {r.fitness:.4f}, rmse {r.inlier_rmse:.4f} mm, "
              f"hausdorff {r.hausdorff:.3f} mm, {r.iterations} iterations")


def _cmd_experiment(args, cfg, reg, plan) -> None:
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.out:
        changes["output_dir"] = args.out
    plan = dataclasses.replace(plan, **changes)
    table = run_experiment(plan, cfg, reg)
    print(table.to_markdown())
    print(f"results in {plan.output_dir}")


def _cmd_traces(args, cfg, reg, plan) -> None:
    if args.record:
        record = load_record(args.record)
    else:
        seed = args.seed if args.seed is not None else plan.base_seed
        record = run_sweep(args.scenario, cfg, seed)
    path = emit_traces(record, args.out or "traces")
    print(f"traces -> {path}")


_COMMANDS = {
    "sweep": _cmd_sweep,
    "reconstruct": _cmd_reconstruct,
    "register": _cmd_register,
    "experiment": _cmd_experiment,
    "traces": _cmd_traces,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, reg, plan = load_config(args.config)
        _COMMANDS[args.command](args, cfg, reg, plan)
    except (ExperimentError, SimulationError, ValueError, OSError) as exc:
        print(f"trussim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
