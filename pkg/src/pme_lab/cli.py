"""Command-line entry point: `pme-lab <subcommand> --config <file> [flags]`."""
from __future__ import annotations

import argparse
import logging
import sys

from .experiments import EXPERIMENTS, ConfigError, load_config, resolve_config, run

log = logging.getLogger("pme_lab")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pme-lab",
                                 description="Porous-medium concavity-breaking experiments.")
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML experiment file")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--grid", type=int, help="cells per side (overrides config)")
        sp.add_argument("--alpha", type=float, action="append",
                        help="concavity exponent; repeat for several (overrides config)")
        sp.add_argument("--m", type=float, help="porous-medium exponent (overrides config)")
        sp.add_argument("--profile", help="Graveleau profile cache file")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {"out": args.out, "grid": args.grid, "alpha": args.alpha, "m": args.m,
                 "profile": args.profile}
    try:
        cfg = resolve_config(load_config(args.config), args.experiment, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    log.info("running %s into %s", cfg["experiment"], cfg["out"])
    report, status = run(cfg)
    for crit, verdict in sorted(report["verdicts"].items(), key=lambda kv: int(kv[0][1:])):
        print(f"{crit} {verdict}")
    if report["error"]:
        print(f"numeric failure: {report['error']}", file=sys.stderr)
    print(f"report: {report['files'][-1]}")
    return status


if __name__ == "__main__":
    sys.exit(main())
