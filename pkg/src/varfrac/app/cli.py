"""Command line front end.

    varfrac simulate CONFIG
    varfrac preset NAME [--override section.key=value ...]
    varfrac threshold CONFIG

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures.  ``VARFRAC_OUTPUT_DIR`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ..discretize import MeshError
from ..ionic import IonicDomainError
from ..matfunc import DeflationError, LanczosError
from ..stepper import DivergenceError, PicardError
from ..vofl import LinearSolveError
from .config import ConfigError, SimulationConfig, parse_config
from .output import OutputError
from .presets import PRESETS, get_preset
from .simulation import ThresholdError, build_problem, find_diastolic_threshold, run_problem

OUTPUT_ENV = "VARFRAC_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (PicardError, DivergenceError, LanczosError, DeflationError, LinearSolveError,
                    ThresholdError, IonicDomainError, FloatingPointError)

log = logging.getLogger("varfrac")


def _parse_override(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"override {text!r} must look like section.key=value")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def _common_options(suppress: bool) -> argparse.ArgumentParser:
    # Subcommands accept the same options; their defaults are suppressed so a
    # value given before the subcommand is not overwritten.
    def default(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=default(None), help="BLAS/OpenMP worker count")
    common.add_argument("--out", type=Path, default=default(None), help="output directory for snapshots")
    common.add_argument("--snapshot-every", type=float, default=default(None), metavar="MS",
                        help="snapshot cadence in ms (overrides the config)")
    common.add_argument("-v", "--verbose", action="count", default=default(0))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options(suppress=True)
    ap = argparse.ArgumentParser(prog="varfrac", description="Variable-order fractional reaction-diffusion "
                                 "and cardiac monodomain simulations.", parents=[_common_options(False)])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a configuration file")
    p.add_argument("config", type=Path)

    p = sub.add_parser("preset", parents=[common], help="run a built-in experiment")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--override", "-o", action="append", type=_parse_override, default=[],
                   metavar="SECTION.KEY=VALUE")
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")

    p = sub.add_parser("threshold", parents=[common], help="bisect the diastolic threshold amplitude")
    p.add_argument("config", type=Path)
    p.add_argument("--upper", type=float, default=None, help="upper amplitude bracket (uA/cm^3)")
    p.add_argument("--rel-tol", type=float, default=0.01)
    p.add_argument("--t-end", type=float, default=None, help="simulation window for each trial (ms)")
    return ap


def _load(path: Path) -> SimulationConfig:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text)


def _out_dir(args, cfg: SimulationConfig):
    if args.out is not None:
        return args.out
    if cfg.output.directory:
        return Path(cfg.output.directory)
    env = os.environ.get(OUTPUT_ENV)
    return Path(env) if env else None


def _summary(cfg, result, problem) -> dict:
    info = {
        "t_end": result.t,
        "steps": result.steps,
        "average_picard": round(result.average_picard, 4),
        "elapsed_s": round(result.elapsed, 3),
        "snapshots": [str(p) for p in result.snapshots],
    }
    if cfg.kind == "beeler-reuter" and problem.dimension == 1 and cfg.output.probes:
        x = problem.coords
        arrivals = {}
        for xp in cfg.output.probes:
            i = int(np.argmin(np.abs(x - xp)))
            t = result.activation[i]
            arrivals[repr(float(x[i]))] = None if np.isnan(t) else round(float(t), 4)
        info["arrival_ms"] = arrivals
    return info


def _simulate(args, cfg: SimulationConfig) -> int:
    problem = build_problem(cfg)
    out = _out_dir(args, cfg)
    result = run_problem(problem, out_dir=out, snapshot_every=args.snapshot_every)
    print(json.dumps(_summary(cfg, result, problem), indent=2))
    return EXIT_OK


def _dispatch(args) -> int:
    if args.command == "simulate":
        return _simulate(args, _load(args.config))
    if args.command == "preset":
        cfg = get_preset(args.name, dict(args.override))
        if args.print_config:
            sys.stdout.write(cfg.to_text())
            return EXIT_OK
        return _simulate(args, cfg)
    cfg = _load(args.config)
    res = find_diastolic_threshold(cfg, upper=args.upper, rel_tol=args.rel_tol, t_end=args.t_end)
    print(json.dumps({"threshold": res.threshold, "lower": res.lower, "runs": res.runs,
                      "threshold_over_chi": res.threshold / cfg.physics.chi}, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return _dispatch(args)
        return _dispatch(args)
    except (ConfigError, MeshError, OutputError) as exc:
        print(f"varfrac: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"varfrac: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
