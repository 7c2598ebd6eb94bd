"""``netcas`` command line: profile, run, sweep-ratio, report."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..models import ConfigError
from ..profile import ProfileError
from ..scheduler import Guard
from . import runner
from .report import cmd_report
from .scenario import builtin_names, load_scenario

log = logging.getLogger("netcas")


def _common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--scenario", required=True, help="scenario JSON file or built-in scenario name")
    p.add_argument("--out", required=True, type=Path, help=out_help)
    p.add_argument("--seed", type=int, help="override the scenario's seed list with one seed")
    p.add_argument("--strict", action="store_true", help="reject unknown scenario fields and unprofiled workloads")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netcas", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="build a perf profile and break-even CSV")
    _common(p, "profile JSON path")
    p.add_argument("--per-point-s", type=float, help="simulated seconds per device per grid point")

    p = sub.add_parser("run", help="run every policy/workload/seed of a scenario")
    _common(p, "output directory")
    p.add_argument("--profile", type=Path, help="profile JSON (built per job when omitted)")
    p.add_argument("--bwrr-guard", choices=[g.value for g in Guard], help="BWRR pattern guard")
    p.add_argument("--records", action="store_true", help="also write per-request completion CSVs")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("sweep-ratio", help="throughput of StaticSplit over a grid of ratios")
    _common(p, "output directory")
    p.add_argument("--profile", type=Path)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--bwrr-guard", choices=[g.value for g in Guard])

    p = sub.add_parser("report", help="render figures and summary.csv from a run directory")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--out", type=Path, help="output directory (defaults to the run directory)")

    sub.add_parser("scenarios", help="list built-in scenarios")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "scenarios":
            print("\n".join(builtin_names()))
            return 0
        if args.command == "report":
            for path in cmd_report(args.run_dir, args.out):
                print(path)
            return 0

        scenario = load_scenario(args.scenario, strict=args.strict)
        if args.command == "profile":
            profile, be = runner.cmd_profile(scenario, args.out, per_point_s=args.per_point_s, seed=args.seed)
            print(args.out)
            print(be)
        elif args.command == "run":
            guard = Guard(args.bwrr_guard) if args.bwrr_guard else None
            print(runner.cmd_run(
                scenario, args.profile, args.out, seed=args.seed, strict=args.strict,
                guard=guard, records=args.records, jobs=args.jobs,
            ))
        elif args.command == "sweep-ratio":
            guard = Guard(args.bwrr_guard) if args.bwrr_guard else None
            print(runner.cmd_sweep_ratio(
                scenario, args.out, args.steps, profile_path=args.profile,
                seed=args.seed, strict=args.strict, guard=guard,
            ))
    except (ConfigError, ProfileError, runner.ResultError, OSError) as exc:
        print(f"netcas: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
