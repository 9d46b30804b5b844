"""``sagnacsim`` command line: one subcommand per experiment recipe.

Exit codes: 0 success, 2 configuration error, 3 fixture comparison failed.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .config import EXPERIMENTS, load_config
from .errors import ConfigError, FixtureFormatError, NormalizationError, TruncationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIXTURE = 3

log = logging.getLogger("sagnacsim")

_HELP = {
    "visibility": "two-photon interference fringes in two bases",
    "tangle-sweep": "tangle versus HH-crystal temperature",
    "chsh": "CHSH S parameter",
    "bbell": "(2,3) beautiful Bell inequality",
    "leggett": "Leggett L3 versus phi",
    "overlap": "spectral overlap of two spectra",
    "tomography": "maximum-likelihood state reconstruction",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="sagnacsim", description="Polarization-entangled source simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", metavar="PATH", help="run configuration file")
        p.add_argument("--seed", type=int, metavar="N", help="master seed (overrides the config)")
        p.add_argument("--fixture", metavar="PATH", help="measured data to analyze instead of simulating")
        p.add_argument("--exact", action="store_true", help="infinite statistics: exact expectations, no sampling")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
        p.add_argument("--format", dest="formats", action="append", choices=("json", "csv", "svg"),
                       help="output format, repeatable (default from config)")
        p.add_argument("--quiet", action="store_true", help="do not print the summary")
        if name == "overlap":
            p.add_argument("--spectra", nargs=2, metavar=("HH_CSV", "VV_CSV"), help="two measured spectra")
    return parser


def _resolve_config(args):
    cfg = load_config(args.config) if args.config else load_config()
    cfg = cfg.with_experiment(name=args.command)
    if args.seed is not None:
        cfg = cfg.with_experiment(seed=args.seed)
    # fixture analysis, exact runs and model overlaps draw no random numbers
    stochastic = not (args.exact or args.fixture or args.command == "overlap")
    return cfg.validate(stochastic=stochastic)


def run(args):
    cfg = _resolve_config(args)
    name = args.command
    if name == "overlap":
        if args.fixture and not args.spectra:
            raise ConfigError("overlap takes measured spectra via --spectra HH_CSV VV_CSV")
        report = experiments.run_overlap(cfg, spectra=args.spectra)
    elif name == "visibility":
        if args.fixture:
            raise ConfigError("visibility has no fixture mode")
        report = experiments.run_visibility(cfg, exact=args.exact)
    else:
        report = experiments.RECIPES[name](cfg, fixture=args.fixture, exact=args.exact)
    out_dir = args.out or cfg.output.directory
    formats = tuple(args.formats) if args.formats else cfg.output.formats
    written = report.write(out_dir, formats)
    if not args.quiet:
        print("\n".join(report.summary_lines()))
        for p in written:
            log.info("wrote %s", p)
    return report


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        report = run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FixtureFormatError, NormalizationError, TruncationError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if report.fixture_mode and not report.all_passed:
        return EXIT_FIXTURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
