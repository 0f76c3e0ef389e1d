"""Command-line entry point: ``mzr {run,mc,verify,table}``.

Exit codes: 0 success, 1 check failure, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, RunConfig, load_config, serialize
from .montecarlo import mc_stats, resolve_threads
from .solver import run_adaptive, run_global_gpc
from .table import build_table, format_table, table_csv
from .verify import default_battery

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("mzr")


def _write(out: Path, name: str, text: str, files: list[str]):
    (out / name).write_text(text, encoding="utf-8")
    files.append(name)


def _manifest(out: Path, cfg: RunConfig | None, files: list[str], wall: float, extra=None):
    doc = {
        "config": cfg.to_dict() if cfg else None,
        "versions": {"mzr": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": wall,
        "files": list(files),
    }
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=1), encoding="utf-8")


def execute(cfg: RunConfig, out: Path) -> int:
    """Run one configured experiment, writing outputs into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    start = time.perf_counter()
    status = EXIT_OK
    extra = {}
    spec = cfg.problem_spec() if cfg.mode != "verify" else None
    if cfg.mode in ("adaptive", "global"):
        if cfg.mode == "adaptive":
            traj = run_adaptive(spec, cfg.refinement())
        else:
            traj = run_global_gpc(spec, cfg.p, cfg.t_end, cfg.dt, cfg.sample_every)
        _write(out, "trajectory.csv", traj.to_csv(), files)
        _write(out, "mesh.json", traj.mesh.dumps(traj.state_names), files)
        extra["final_elements"] = int(traj.n_elements[-1])
        print(f"{cfg.mode} {cfg.problem}: {traj.n_elements[-1]} elements at t={traj.times[-1]:g}")
    elif cfg.mode == "mc":
        res = mc_stats(spec, cfg.monte_carlo())
        _write(out, "mc.csv", res.to_csv(), files)
        print(f"mc {cfg.problem}: {res.n_samples} samples, {len(res.times)} sample times")
    elif cfg.mode == "verify":
        reports = default_battery(cfg.seed)
        for rep in reports:
            print(rep.line())
        _write(out, "verify.jsonl", "".join(r.to_json() + "\n" for r in reports), files)
        if not all(r.passed for r in reports):
            status = EXIT_CHECK
    elif cfg.mode == "table":
        rows, label = build_table(cfg)
        print(format_table(rows, label))
        _write(out, "table.csv", table_csv(rows), files)
        extra["reference"] = label
    _write(out, "config.toml", serialize(cfg), files)
    _manifest(out, cfg, files, time.perf_counter() - start, extra)
    return status


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mzr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"mzr {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run the experiment named by the config's mode"),
                           ("mc", "Monte Carlo reference statistics"),
                           ("verify", "energy-rate and tensor check battery"),
                           ("table", "N and error table over a tolerance/order sweep")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, required=name != "verify", help="TOML config file")
        p.add_argument("--out", type=Path, help="output directory (overrides config 'out')")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
        p.add_argument("--threads", type=int, help="worker threads (default: MZR_THREADS or 1)")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        else:
            cfg = RunConfig(problem="ko1d", mode="verify")
        over = {}
        if args.command != "run":
            over["mode"] = args.command
        if args.out is not None:
            over["out"] = str(args.out)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must fit in an unsigned 64-bit integer")
            over["seed"] = args.seed
        threads = args.threads if args.threads is not None else (
            int(os.environ["MZR_THREADS"]) if "MZR_THREADS" in os.environ else None)
        if threads is not None:
            if threads < 1:
                raise ConfigError("--threads must be >= 1")
            over["threads"] = resolve_threads(threads)
        cfg = replace(cfg, **over)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"mzr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return execute(cfg, Path(cfg.out))
    except Exception as exc:  # noqa: BLE001 - every module failure maps to exit 3
        log.debug("failure", exc_info=True)
        print(f"mzr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
