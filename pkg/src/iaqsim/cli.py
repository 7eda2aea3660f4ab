"""Command-line entry point.

Exit codes::

    0  success
    1  scenario failed validation (violations printed one per line)
    2  bad command line (argparse)
    3  I/O or parse error (unreadable scenario, malformed YAML, unwritable output)
    4  internal error
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import sweep as sweep_mod
from .engine import RECORD_HEADER, RecordFormatter, run
from .metrics import write_tables
from .rng import STREAM_VERSION
from .scenario import (
    PRESET_NAMES, ScenarioError, ScenarioParseError, dump_scenario, load_scenario, parse_duration,
    resolve_scenario_path,
)

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3, 4
OUT_ROOT_ENV = "IAQSIM_OUT_ROOT"

log = logging.getLogger("iaqsim")


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


class OutputDirError(OSError):
    pass


def _prepare_out_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path, prefix=".probe-"):
            pass
    except OSError as exc:
        raise OutputDirError(f"output directory {path} is not writable: {exc.strerror or exc}") from exc
    return path


def _default_out(name: str, seed: int, kind: str = "run") -> Path:
    root = Path(os.environ.get(OUT_ROOT_ENV, "runs"))
    return root / f"{name}-{kind}-seed{seed}"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _load(args):
    sc = load_scenario(args.scenario)
    if getattr(args, "duration", None) is not None:
        sc.duration = args.duration
        sc.validate()
    return sc


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    print(f"ok: {sc.name} ({len(sc.nodes)} nodes, {sc.duration:g} s)")
    return EXIT_OK


def cmd_run(args) -> int:
    sc = _load(args)
    seed = sc.master_seed if args.seed is None else args.seed
    sc.master_seed = seed
    out = _prepare_out_dir(Path(args.out) if args.out else _default_out(sc.name, seed))
    started = time.perf_counter()

    snapshot = dump_scenario(sc)
    (out / "scenario.yaml").write_text(snapshot, encoding="utf-8")
    fmt = RecordFormatter(sc.start_date)
    events_path = out / "events.csv"
    with events_path.open("w", encoding="utf-8", newline="\n", buffering=1 << 20) as fh:
        fh.write(RECORD_HEADER + "\n")
        result = run(sc, seed=seed, log_sink=lambda rec: fh.write(fmt(rec) + "\n"), keep_records=False)
    m = result.metrics
    files = ["scenario.yaml", "events.csv"] + [p.name for p in write_tables(m, sc, out, args.format)]

    summary = {
        "scenario": sc.name,
        "seed": seed,
        "duration_s": sc.duration,
        **m.summary(),
        "mean_power_mw": {n: e / sc.duration * 1e3 for n, e in sorted(m.energy_j.items())},
        "events_processed": result.stats.processed,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    files.append("summary.json")

    manifest = {
        "tool": "iaqsim",
        "tool_version": tool_version(),
        "rng": STREAM_VERSION,
        "numpy_version": np.__version__,
        "scenario_path": str(resolve_scenario_path(args.scenario)),
        "scenario_snapshot": "scenario.yaml",
        "scenario_sha256": hashlib.sha256(snapshot.encode()).hexdigest(),
        "seed": seed,
        "duration_s": sc.duration,
        "format": args.format,
        "out_dir": str(out),
        "files": files,
        "rerun": f"iaqsim run --scenario {out / 'scenario.yaml'} --out <dir>",
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")

    tp = "n/a" if m.throughput is None else f"{m.throughput:.4f}"
    print(f"scenario {sc.name}  seed {seed}  horizon {sc.duration / 86400:g} d")
    print(f"throughput {tp}  ({sum(m.delivered.values())}/{sum(m.generated.values())} delivered)")
    for nid in sorted(m.energy_j):
        print(f"  {nid:<12} {m.energy_j[nid]:>14.1f} J  {m.energy_j[nid] / sc.duration * 1e3:>8.2f} mW")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _load(args)
    if args.seed is not None:
        sc.master_seed = args.seed
    if args.param not in sweep_mod.SWEEP_PARAMS:
        print(f"error: unknown parameter {args.param!r}; valid parameters:", file=sys.stderr)
        for p in sorted(sweep_mod.SWEEP_PARAMS):
            print(f"  {p}", file=sys.stderr)
        return EXIT_USAGE
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        print(f"error: --values must be comma-separated numbers, got {args.values!r}", file=sys.stderr)
        return EXIT_USAGE
    out = _prepare_out_dir(Path(args.out) if args.out else _default_out(sc.name, sc.master_seed, "sweep"))
    rows = sweep_mod.sweep(sc, args.param, values, args.replicas, jobs=args.jobs)
    path = out / "sweep.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for row in rows:
        tp = row["throughput"]
        print(f"{args.param}={row['value']:<8g} replica {row['replica']}  throughput "
              + ("n/a" if tp is None else f"{tp:.4f}"))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in PRESET_NAMES:
        sc = load_scenario(name)
        print(f"{name:<18} {sc.description}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _duration_arg(text: str) -> float:
    try:
        return parse_duration(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed_arg(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iaqsim", description="Indoor air-quality ZigBee sensor network simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_opts(sp, positional=False):
        if positional:
            sp.add_argument("scenario_pos", nargs="?", metavar="SCENARIO")
        sp.add_argument("--scenario", default=None,
                        help=f"preset name ({', '.join(PRESET_NAMES)}) or path to a YAML file")

    sp = sub.add_parser("validate", help="check a scenario file")
    scenario_opts(sp, positional=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("run", help="simulate one scenario and export metrics")
    scenario_opts(sp, positional=True)
    sp.add_argument("--seed", type=_seed_arg, default=None, help="override the scenario's master seed")
    sp.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ROOT_ENV} or ./runs)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv", help="metrics table format")
    sp.add_argument("--duration", type=_duration_arg, default=None, help="override the horizon, e.g. 2d")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="rerun a scenario across values of one parameter")
    scenario_opts(sp, positional=True)
    sp.add_argument("--param", required=True, help="parameter path, e.g. link.delivery_probability")
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.add_argument("--replicas", type=int, default=1)
    sp.add_argument("--seed", type=_seed_arg, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--duration", type=_duration_arg, default=None)
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("presets", help="list shipped scenarios")
    sp.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if hasattr(args, "scenario_pos"):
        if args.scenario_pos and args.scenario:
            print("error: give the scenario either positionally or with --scenario, not both", file=sys.stderr)
            return EXIT_USAGE
        args.scenario = args.scenario_pos or args.scenario or "paper-default"
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario {args.scenario}:", file=sys.stderr)
        for v in exc.violations:
            print(v, file=sys.stderr)
        return EXIT_INVALID
    except sweep_mod.SweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
