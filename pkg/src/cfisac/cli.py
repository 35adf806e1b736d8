"""Command-line entry point: ``cfisac <subcommand> [options]``.

Subcommands map to experiment kinds; a config file may pick a different
kind where a subcommand covers several (``rates`` runs ``rates_cdf``,
``median_vs_tau`` or ``median_vs_K``; ``ber`` runs ``ber_sweep`` or
``ber_vs_ratio``).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import ConfigError, ExperimentSpec, load_config
from .experiments import run_experiment

SUBCOMMANDS = {
    "design-pilots": ("design",),
    "rates": ("rates_cdf", "median_vs_tau", "median_vs_K"),
    "ber": ("ber_sweep", "ber_vs_ratio"),
    "acf": ("acf_profile",),
    "range-profile": ("range_profile",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfisac", description="Pilot design and detection experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kinds in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a {' / '.join(kinds)} experiment")
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--trials", type=int, help="number of trials (overrides the config)")
        p.add_argument("--out", help="output CSV path (overrides the config)")
        p.add_argument("--scheme", action="append", help="scheme to include; repeatable")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _sets_kind(path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return any(line.split("#", 1)[0].split("=", 1)[0].strip() == "kind" for line in fh)


def spec_from_args(args) -> ExperimentSpec:
    kinds = SUBCOMMANDS[args.command]
    if args.config:
        spec = load_config(args.config)
        if not _sets_kind(args.config):
            spec = dataclasses.replace(spec, kind=kinds[0])
        elif spec.kind not in kinds:
            raise ConfigError(f"kind {spec.kind!r} does not belong to '{args.command}'")
    else:
        spec = ExperimentSpec(kind=kinds[0])
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.out is not None:
        overrides["out"] = args.out
    if args.scheme:
        overrides["schemes"] = tuple(args.scheme)
    return dataclasses.replace(spec, **overrides) if overrides else spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        spec = spec_from_args(args)
        path = run_experiment(spec)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
