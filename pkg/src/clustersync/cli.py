"""Command line entry point: ``clustersync run`` and ``clustersync check``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ClusterSyncError
from .experiment import (
    PRESETS,
    export_csv,
    load_config,
    run_case,
    run_criteria,
    with_overrides,
    write_summary,
)

log = logging.getLogger("clustersync")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustersync", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a configured case")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="YAML or JSON experiment file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in example case")
    run.add_argument("--out", help="CSV path for the error trajectory")
    run.add_argument("--summary", help="JSON path for the run summary")
    run.add_argument("--step", type=float, help="override the integration step h")
    run.add_argument("--horizon", type=float, help="override the horizon T")
    run.add_argument("--tol", type=float, help="override the settling tolerance")

    check = sub.add_parser("check", help="evaluate the synchronization criteria only")
    src = check.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="YAML or JSON experiment file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in example case")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config or args.preset)
    if args.step is not None or args.horizon is not None or args.tol is not None:
        config = with_overrides(config, h=args.step, T=args.horizon, tol=args.tol)
    traj, summary = run_case(config)
    out = args.out or config.csv_path
    if out:
        export_csv(traj, out)
    summary_path = args.summary or config.summary_path
    if summary_path:
        write_summary(summary, summary_path)
    settle = "none" if summary.settling_time is None else f"{summary.settling_time:.6g}"
    print(f"{summary.name}: final max |e| = {summary.final_max_error:.3e}, "
          f"settling (tol {summary.tol:g}) = {settle}, {summary.wall_clock:.2f} s")
    if summary.settling_estimate is not None:
        print(f"  estimated settling time = {summary.settling_estimate:.6g}")
    if summary.criteria_passed is not None:
        print(f"  criteria: {'pass' if summary.criteria_passed else 'fail'}")
    return 0


def _cmd_check(args) -> int:
    config = load_config(args.config or args.preset)
    reports = run_criteria(config)
    if not reports:
        print("no criteria parameters configured")
        return 0
    for report in reports:
        print(report.to_text())
    return 0 if all(r.passed for r in reports) else 2


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _cmd_run(args) if args.command == "run" else _cmd_check(args)
    except (ClusterSyncError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
