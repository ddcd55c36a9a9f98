"""Command line: ``numphase simulate`` and ``numphase report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment


def _simulate(args) -> int:
    text = Path(args.config).read_text()
    overrides = {"seed": args.seed, "out_dir": args.out, "workers": args.workers}
    if args.method:
        overrides["methods"] = ",".join(args.method)
    try:
        config = experiment.parse_config(text, **overrides)
    except experiment.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    results = experiment.run_experiment(config)
    paths = experiment.write_csv(results, config.out_dir)
    for p in paths:
        print(p)
    if "oracle" in results:
        print(experiment.write_report(results, Path(config.out_dir) / "divergence.csv"))
    failed = [m for m, r in results.items() if isinstance(r, str)]
    for m in failed:
        print(f"{m}: {results[m]}", file=sys.stderr)
    return 1 if failed else 0


def _report(args) -> int:
    oracle = experiment.read_csv(args.oracle, "oracle")
    status = 0
    for path in args.method:
        series = experiment.read_csv(path)
        t = experiment.divergence_time(series, oracle, args.floor)
        print(f"{series.method}: {'none within horizon' if t is None else f'{t:.6g}'}")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="numphase", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the oracle and stochastic methods from a config file")
    sim.add_argument("--config", required=True)
    sim.add_argument("--method", action="append", choices=experiment.ALL_METHODS)
    sim.add_argument("--out")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--workers", type=int)
    sim.set_defaults(func=_simulate)

    rep = sub.add_parser("report", help="print the divergence time of method CSVs against an oracle CSV")
    rep.add_argument("--oracle", required=True)
    rep.add_argument("--method", required=True, action="append")
    rep.add_argument("--floor", type=float)
    rep.set_defaults(func=_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
