"""Command-line entry point: ``ofdm-gfa {sweep,bench,trial,selftest}``.

Settings are layered: preset, then ``--config`` file, then explicit flags.
The config file is read with :mod:`configparser`; bare ``key = value``
lines are accepted and section names are ignored, so both flat and
sectioned files work::

    [system]
    N = 100
    L = 32
    [experiment]
    sweep_param = P
    sweep_values = 1, 2, 4
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys

from . import harness, selftest
from .signal_model import SystemConfig

THREADS_ENV = "OFDM_GFA_THREADS"
SYSTEM_KEYS = {"N": int, "M": int, "L": int, "P": int, "noise_var": float,
               "activity_prob": float}
EXPERIMENT_KEYS = {"sweep_param": str, "sweep_values": str, "trials": int, "schemes": str,
                   "seed": int, "rho": str, "out": str, "threads": int, "max_sweeps": int,
                   "tol": float, "reps": int}


class UsageError(ValueError):
    pass


def read_config(path: str) -> dict[str, str]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    parser = configparser.ConfigParser(delimiters=("=", ":"), inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep N, M, L, P case
    try:
        parser.read_string("[__flat__]\n" + text, source=path)
    except configparser.Error as exc:
        raise UsageError(f"bad config {path}: {exc}".splitlines()[0]) from None
    flat = {}
    for section in parser.sections():
        flat.update(parser[section])
    unknown = set(flat) - set(SYSTEM_KEYS) - set(EXPERIMENT_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return flat


def _split(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _rho(text: str):
    if text in ("auto", "sweep"):
        return text
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--rho expects auto, sweep or a number, got {text!r}") from None


def resolve(args) -> tuple[harness.ExperimentSpec, int]:
    """Merge preset, config file and flags into an experiment spec."""
    preset = harness.PRESETS[args.preset]
    system = dict(preset["base"])
    exp = {"sweep_param": preset["sweep_param"],
           "sweep_values": ",".join(map(str, preset["sweep_values"])),
           "trials": preset["trials"], "schemes": ",".join(harness.SCHEMES), "seed": 0,
           "rho": "auto", "out": None, "threads": None, "max_sweeps": 20, "tol": 1e-4, "reps": 5}
    if args.config:
        for key, raw in read_config(args.config).items():
            kind = SYSTEM_KEYS.get(key) or EXPERIMENT_KEYS[key]
            try:
                value = kind(raw)
            except ValueError:
                raise UsageError(f"config key {key}: cannot parse {raw!r}") from None
            (system if key in SYSTEM_KEYS else exp)[key] = value
    for key in ("seed", "rho", "schemes", "out", "threads", "trials", "sweep_param",
                "sweep_values", "reps"):
        val = getattr(args, key, None)
        if val is not None:
            exp[key] = val
    threads = exp["threads"]
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if threads < 1:
        raise UsageError("thread count must be >= 1")
    spec = harness.ExperimentSpec(
        base=SystemConfig(**system),
        sweep_param=exp["sweep_param"],
        sweep_values=_split(exp["sweep_values"]),
        trials=int(exp["trials"]),
        schemes=_split(exp["schemes"]),
        seed=int(exp["seed"]),
        rho=_rho(str(exp["rho"])),
        out=exp["out"],
        threads=threads,
        max_sweeps=int(exp["max_sweeps"]),
        tol=float(exp["tol"]),
    )
    return spec, int(exp["reps"])


def _emit(rows, out_path):
    if out_path is None:
        csv.writer(sys.stdout, lineterminator="\n").writerows(rows)


def cmd_sweep(args) -> int:
    spec, _ = resolve(args)
    _emit(harness.sweep(spec), spec.out)
    return 0


def cmd_bench(args) -> int:
    spec, reps = resolve(args)
    _emit(harness.bench(spec, reps=reps), spec.out)
    return 0


def cmd_trial(args) -> int:
    spec, _ = resolve(args)
    value, config = spec.point_configs()[0]
    report = harness.run_trial(config, spec.schemes, spec.seed, args.index, spec.rho,
                               spec.options)
    dump = {
        "trial": report.trial, "seed": report.seed, spec.sweep_param: value,
        "truth": report.truth.tolist(),
        "schemes": {name: {"scores": r.scores.tolist(), "decisions": r.decisions.tolist(),
                           "threshold": r.threshold, "errors": r.errors,
                           "seconds": r.seconds, "rho": r.rho}
                    for name, r in report.results.items()},
    }
    text = json.dumps(dump, indent=2)
    if spec.out:
        with open(spec.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_selftest(args) -> int:
    return 0 if selftest.run(seed=args.seed or 0) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(harness.PRESETS), default="desk")
    common.add_argument("--config", help="key=value or sectioned config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--rho", help="penalty weight: auto, sweep, or a number")
    common.add_argument("--schemes", help="comma list of " + ", ".join(harness.SCHEMES))
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--threads", type=int,
                        help=f"worker processes (default ${THREADS_ENV} or 1)")
    common.add_argument("--trials", type=int)
    common.add_argument("--sweep-param", dest="sweep_param", choices=harness.SWEEP_PARAMS)
    common.add_argument("--sweep-values", dest="sweep_values", help="comma list")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ofdm-gfa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", parents=[common], help="error-rate sweep to CSV"
                   ).set_defaults(func=cmd_sweep)
    b = sub.add_parser("bench", parents=[common], help="detector timing to CSV")
    b.add_argument("--reps", type=int)
    b.set_defaults(func=cmd_bench)
    t = sub.add_parser("trial", parents=[common], help="JSON dump of one trial")
    t.add_argument("--index", type=int, default=0, help="trial index")
    t.set_defaults(func=cmd_trial)
    s = sub.add_parser("selftest", help="quick oracle checks")
    s.add_argument("--seed", type=int)
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return 130
    except Exception as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
