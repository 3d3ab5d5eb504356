"""
Command-line entry points.

    modscatter run --config cfg.json --out rundir
    modscatter analyze rundir
    modscatter verify --profile quick|full --out dir
    modscatter sweep --config template.json --param eps=0.2,0.3,0.5 --out dir

Exit codes: 0 success, 2 config error, 3 solver abort, 4 verification failure.
MODSCATTER_THREADS caps transform/sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, SimConfig, load_config
from .evolution import SolverAbort, evolve
from .resonance import sample_series
from .runio import read_run_dir, write_analysis, write_run_dir
from .scattering import extract_scattering
from .verify import format_table, verify

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_VERIFY = 4


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.time()
    try:
        series = evolve(config)
    except SolverAbort as exc:
        wall = time.time() - t0
        if exc.partial is not None and exc.partial.snapshots:
            write_run_dir(exc.partial, args.out, wall_time=wall, aborted=str(exc))
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    write_run_dir(series, args.out, wall_time=time.time() - t0)
    print(f"run complete: {len(series.snapshots)} snapshots, "
          f"mass drift {series.mass_drift:.3e} -> {args.out}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    try:
        series = read_run_dir(args.run_dir)
        report = extract_scattering(series)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"analyze error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_analysis(args.run_dir, report, sample_series(series))
    if report.pass_flags.get("degenerate"):
        print("analysis complete (degenerate: zero data, fits undefined)")
    else:
        print(f"analysis complete: decay {report.decay_exponent_fit[0]:+.4f}, "
              f"delta {report.delta_fit[0]:+.4f}, drift match {report.drift_match:.3f}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    outcome = verify(args.profile, args.out)
    print(format_table(outcome))
    return EXIT_OK if outcome.overall else EXIT_VERIFY


def _sweep_one(task) -> tuple:
    config_dict, out_dir = task
    config = SimConfig(**config_dict)
    series = evolve(config)
    write_run_dir(series, out_dir)
    return out_dir, series.mass_drift


def _cmd_sweep(args) -> int:
    try:
        template = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        name, raw = args.param.split("=", 1)
        values = [float(v) for v in raw.split(",") if v]
    except ValueError:
        print(f"config error: cannot parse --param {args.param!r}", file=sys.stderr)
        return EXIT_CONFIG
    if not hasattr(template, name):
        print(f"config error: unknown sweep parameter {name!r}", file=sys.stderr)
        return EXIT_CONFIG

    tasks = []
    for v in values:
        cfg = replace(template, **{name: v})
        try:
            cfg.validate()
        except ConfigError as exc:
            print(f"config error at {name}={v}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        tasks.append((cfg.to_dict(), str(Path(args.out) / f"{name}={v:g}")))

    workers = max(1, int(os.environ.get("MODSCATTER_THREADS", "1")))
    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            for out_dir, drift in pool.map(_sweep_one, tasks):
                print(f"{out_dir}: mass drift {drift:.3e}")
    else:
        for task in tasks:
            out_dir, drift = _sweep_one(task)
            print(f"{out_dir}: mass drift {drift:.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modscatter", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="integrate one configuration")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(fn=_cmd_run)

    pa = sub.add_parser("analyze", help="scattering + resonance reports for a run directory")
    pa.add_argument("run_dir")
    pa.set_defaults(fn=_cmd_analyze)

    pv = sub.add_parser("verify", help="evaluate the acceptance criteria")
    pv.add_argument("--profile", choices=("quick", "full"), default="quick")
    pv.add_argument("--out", default="verify-out")
    pv.set_defaults(fn=_cmd_verify)

    ps = sub.add_parser("sweep", help="run a template config across parameter values")
    ps.add_argument("--config", required=True)
    ps.add_argument("--param", required=True, metavar="NAME=V1,V2,...")
    ps.add_argument("--out", required=True)
    ps.set_defaults(fn=_cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
