"""Command line front end.

Usage:
    contilab list
    contilab run NAME [--out DIR] [--plot] [--trials N] [--seed S]
                      [--workers N] [--dry-run] [--KEY=VALUE ...]

Free-form ``--key=value`` flags override experiment parameters by name
(``contilab run fig2_lms_sweep --trials=50 --env.eta=0.8``).
"""

from __future__ import annotations

import argparse
import re
import sys

from .errors import ConfigurationError, ContilabError
from .experiments import experiment_defaults, list_experiments, run_experiment

_OVERRIDE = re.compile(r"^--([A-Za-z0-9_.]+)=(.*)$")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contilab")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list registered experiments")
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("name")
    run.add_argument("--out", default=None, help="output directory (default runs/<name>)")
    run.add_argument("--plot", action="store_true", help="also write plot.svg")
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--dry-run", action="store_true", help="validate config without running")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args, extra = parser.parse_known_args(argv)

    if args.command == "list":
        for name in list_experiments():
            print(name)
        return 0

    overrides = {}
    for token in extra:
        m = _OVERRIDE.match(token)
        if m is None:
            parser.error(f"unrecognized argument {token!r} (overrides look like --key=value)")
        overrides[m.group(1)] = m.group(2)
    defaults = None
    try:
        defaults = experiment_defaults(args.name)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.trials is not None:
        if "trials" not in defaults:
            print(f"error: {args.name} takes no trial count", file=sys.stderr)
            return 2
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed

    try:
        paths = run_experiment(
            args.name, overrides, args.out,
            plot=args.plot, workers=args.workers, dry_run=args.dry_run,
        )
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContilabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.dry_run:
        print(f"{args.name}: config ok")
    else:
        for path in paths:
            print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
