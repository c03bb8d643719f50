"""Command line: ``leosec run|sweep|beammap|validate <config>``.

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 partial
failure (some sweep cells failed).
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .constellation import NoVisibleSatelliteError
from .experiment import NoCoverageError, build_experiment_scenes, run_beammap, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PARTIAL = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="configuration file ('-' reads stdin)")
    common.add_argument("--seed", type=int, help="override solver.seed")
    common.add_argument("--out", help="output directory (default: output.directory)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweep cells")
    common.add_argument("--quiet", action="store_true", help="only report errors")
    p = argparse.ArgumentParser(prog="leosec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="optimise every configured variant once")
    sub.add_parser("sweep", parents=[common], help="run the [sweep] block")
    bm = sub.add_parser("beammap", parents=[common], help="beam gain maps after optimisation")
    bm.add_argument("--slot", type=int, help="slot index to map (default: most eavesdroppers)")
    sub.add_parser("validate", parents=[common], help="parse the config and build the scenes")
    return p


def _load(path: str) -> ExperimentConfig:
    if path == "-":
        return parse_config(sys.stdin.read())
    return load_config(path)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    log = logging.getLogger("leosec")
    try:
        cfg = _load(args.config)
        if args.seed is not None:
            cfg = cfg.with_value("solver.seed", args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except (ConfigError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else None
    try:
        if args.command == "validate":
            scenes = build_experiment_scenes(cfg)
            if not args.quiet:
                print(f"ok: {len(scenes)} covered slots, eavesdroppers per slot "
                      f"{[s.num_eavesdroppers for s in scenes]}")
            return EXIT_OK
        if args.command == "run":
            cfg = replace(cfg, sweep=replace(cfg.sweep, parameter=None, values=()))
            status, path = run_experiment(cfg, out, args.threads)
        elif args.command == "sweep":
            if cfg.sweep.parameter is None:
                raise ConfigError("the config has no [sweep] parameter")
            status, path = run_experiment(cfg, out, args.threads)
        else:
            status, path = run_beammap(cfg, out, args.slot)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (NoCoverageError, NoVisibleSatelliteError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    if not args.quiet:
        print(f"results in {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
