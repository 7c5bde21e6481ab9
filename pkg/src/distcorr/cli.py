"""Command-line entry point.

Examples
--------
    distcorr run --figure fig6 --realizations 200 --out fig6.csv
    distcorr run --scenario scenario.json --format json --out result.json
    distcorr presets
    distcorr quantizer --bits 4
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .experiments import ConfigError, figure_preset, load_config, run_scenario, write_results
from .experiments.presets import PRESETS
from .experiments.results import FORMATS, format_csv
from .hardware import NumericalError, lloyd_quantizer

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("distcorr")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="distcorr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write a result table")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="PATH", help="JSON scenario file (kebab-case keys)")
    src.add_argument("--figure", metavar="NAME", help=f"named preset: {', '.join(PRESETS)}")
    run.add_argument("--seed", type=_seed, help="override the scenario seed")
    run.add_argument("--realizations", type=_positive_int, help="override the realization count")
    run.add_argument("--mc-samples", type=_positive_int, help="override the Bussgang sample count")
    run.add_argument("--workers", type=_positive_int, default=1, help="worker processes (default 1)")
    run.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    run.add_argument("--format", choices=FORMATS, help="csv or json (default: from --out suffix, else csv)")

    sub.add_parser("presets", help="list preset names")

    q = sub.add_parser("quantizer", help="print a Lloyd quantizer table as JSON")
    q.add_argument("--bits", type=_positive_int, required=True)
    return parser


def _run(args):
    cfg = load_config(args.scenario) if args.scenario else figure_preset(args.figure)
    cfg = cfg.with_overrides(seed=args.seed, realizations=args.realizations, mc_samples=args.mc_samples)
    fmt = args.format or ("json" if args.out and args.out.lower().endswith(".json") else "csv")
    log.info("running %s (%s, %d realizations, %d worker(s))", cfg.name, cfg.metric,
             cfg.realizations, args.workers)
    table = run_scenario(cfg, workers=args.workers)
    if args.out:
        write_results(table, args.out, fmt)
        log.info("wrote %d rows to %s", len(table.rows), args.out)
    elif fmt == "json":
        sys.stdout.write(json.dumps(table.to_dict(), indent=2) + "\n")
    else:
        sys.stdout.write(format_csv(table))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "presets":
            for name in PRESETS:
                cfg = figure_preset(name)
                print(f"{name}\t{cfg.metric}\tsweep {cfg.sweep.variable}")
        elif args.command == "quantizer":
            if args.bits > 12:
                raise ConfigError(f"bits: must be in [1, 12], got {args.bits}")
            print(lloyd_quantizer(args.bits).to_json(indent=2))
        else:
            _run(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
