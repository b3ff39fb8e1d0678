"""``paratime`` command line: run presets or config files, list presets, ingest speed models.

Exit status: 0 on success (a diverged run is still a success and is
flagged in summary.csv), 1 for a numerical setup error such as a CFL
violation, 2 for I/O or configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .experiments import (
    PRESET_NAMES,
    PRESET_SWEEPS,
    ConfigError,
    build_problem,
    ingest_speed_model,
    load_config,
    preset,
    preset_sweep,
    run_experiment,
)
from .grid import SpeedFileError, write_speed_file

log = logging.getLogger("paratime")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="paratime", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a key = value config file")
    run.add_argument("target", help="preset name or path to a config file")
    run.add_argument("--out", help="output directory (default: the config's out)")
    run.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--sweep", action="store_true",
                     help="run every value of the preset's swept parameter into subdirectories")

    sub.add_parser("presets", help="list the named presets")

    ing = sub.add_parser("ingest", help="validate a speed file and resample it")
    ing.add_argument("speedfile")
    ing.add_argument("--target", required=True, help="ny,nx of the resampled grid")
    ing.add_argument("--out", help="write the resampled model here")
    return p


def _load(target: str):
    if Path(target).is_file():
        return [load_config(target)]
    return None


def _configs(args):
    cfgs = _load(args.target)
    if cfgs is None:
        cfgs = preset_sweep(args.target) if args.sweep else [preset(args.target)]
    elif args.sweep:
        raise ConfigError("--sweep applies to presets only")
    for override in args.override:
        key, sep, value = override.partition("=")
        if not sep:
            raise ConfigError(f"override must look like key=value, got {override!r}")
        for cfg in cfgs:
            cfg.set(key.strip(), value.strip())
    if args.out:
        base = Path(args.out)
        if len(cfgs) == 1:
            cfgs[0].out = str(base)
        else:
            key = PRESET_SWEEPS[cfgs[0].name][0]
            for cfg in cfgs:
                cfg.out = str(base / f"{key}={getattr(cfg, key)}")
    for cfg in cfgs:
        cfg.validate()
    return cfgs


def cmd_run(args) -> int:
    cfgs = _configs(args)
    for cfg in cfgs:
        # the whole sweep is validated (and problems built) before anything runs
        build_problem(cfg)
    for cfg in cfgs:
        res = run_experiment(cfg, workers=args.workers)
        errs = res.run.final_energy_errors()
        flag = "  DIVERGED" if res.diverged else ""
        print(f"{cfg.name} [{cfg.variant}] -> {cfg.out}: final energy error "
              f"k=1 {errs[0]:.3e}, k={len(errs)} {errs[-1]:.3e} ({res.seconds:.1f} s){flag}")
    return 0


def cmd_presets(args) -> int:
    for name in PRESET_NAMES:
        cfg = preset(name)
        sweep = PRESET_SWEEPS.get(name)
        extra = f"  sweep {sweep[0]} in {sweep[1]}" if sweep else ""
        shape = "x".join(str(int(round(L / cfg.dx))) for L in cfg.extent)
        print(f"{name:18s} {cfg.dimension}D {shape:>8s} T={cfg.T:g} variant={cfg.variant}{extra}")
    return 0


def cmd_ingest(args) -> int:
    try:
        ny, nx = (int(s) for s in args.target.split(","))
    except ValueError:
        raise ConfigError(f"--target must be ny,nx, got {args.target!r}") from None
    field = ingest_speed_model(args.speedfile, (ny, nx))
    print(f"{args.speedfile}: resampled to {field.grid.shape}, "
          f"speed min {field.cmin:.6g} max {field.cmax:.6g}")
    if args.out:
        write_speed_file(args.out, field.c, field.grid.spacing)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "presets": cmd_presets, "ingest": cmd_ingest}[args.command]
    try:
        return handler(args)
    except (ConfigError, SpeedFileError, OSError) as exc:
        print(f"paratime: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"paratime: setup error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
