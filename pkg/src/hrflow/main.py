"""Command-line entrypoint for hrflow."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import pandas as pd

from .catalog import list_catalog, make_catalog_algebra
from .checks import SUITES, run_checks
from .errors import HRFlowError
from .isotropy import bracket_coefficients, build_space, classify_topology
from .models import Tolerances
from .parse import load_manifest
from .runner import execute_run, sweep

logger = logging.getLogger(__name__)

EXIT_MATH = 3


def _configure_logging(level: int) -> None:
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger().setLevel(level)


def _print_error(exc: HRFlowError) -> int:
    print(json.dumps(exc.to_dict(), indent=2), file=sys.stderr)
    return exc.exit_code


def _load(args: argparse.Namespace):
    manifest = load_manifest(args.manifest)
    if args.seed is not None:
        manifest = replace(manifest, seed=args.seed)
    if args.tol is not None:
        manifest = replace(manifest, flow=manifest.flow.with_tolerance(args.tol))
    return manifest


# =============================================================================
# COMMANDS
# =============================================================================


def run_cmd(args: argparse.Namespace) -> int:
    try:
        manifest = _load(args)
    except HRFlowError as exc:
        return _print_error(exc)
    outcome = execute_run(manifest, args.out)
    if outcome.error:
        print(json.dumps(outcome.error, indent=2), file=sys.stderr)
    else:
        summary = outcome.summary or {}
        print(f"Run directory: {outcome.out_dir}")
        print(f"Regime:        {summary.get('regime')} ({summary.get('outcome')})")
        if summary.get("T") is not None:
            print(f"Extinction T:  {summary['T']}")
        print(f"Verdict:       {summary.get('verdict')}")
        print(f"Status:        {summary.get('status')}")
    return outcome.exit_code


def check_command(
    suite: str = "all", seed: int = 0, tol: Tolerances | None = None
) -> int:
    """Run a check suite, print per-check residuals, 0 iff everything passes."""
    try:
        reports = run_checks(suite, seed, tol)
    except HRFlowError as exc:
        return _print_error(exc)
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        print(f"[{status}] {report.name}")
        for key, value in report.residuals.items():
            shown = "n/a" if value is None else f"{value:.3e}"
            mark = " <-" if key in report.failed else ""
            print(f"    {key:<22} {shown}{mark}")
        for note in report.notes:
            print(f"    note: {note}")
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} checks passed")
    return 0 if failed == 0 else EXIT_MATH


def catalog_frame() -> pd.DataFrame:
    """Key, dim, split dims, module count and regime of every preset."""
    rows = []
    for key in list_catalog():
        entry = make_catalog_algebra(key)
        row = {
            "key": key,
            "dim": entry.algebra.dim,
            "dim_k": len(entry.split.k_indices),
            "dim_p": len(entry.split.p_indices),
            "dim_h": len(entry.h_indices),
        }
        try:
            space = build_space(entry)
            regime = classify_topology(space, bracket_coefficients(space))
            row["modules"] = space.n_modules
            row["regime"] = regime.regime
        except HRFlowError as exc:
            row["modules"] = None
            row["regime"] = f"error: {exc.kind}"
        rows.append(row)
    return pd.DataFrame(rows)


def catalog_command() -> int:
    print(catalog_frame().to_string(index=False))
    return 0


def sweep_cmd(args: argparse.Namespace) -> int:
    try:
        manifest = _load(args)
        start = manifest.seed
        frame = sweep(
            manifest, list(range(start, start + args.count)), args.batch, args.out
        )
    except HRFlowError as exc:
        return _print_error(exc)
    print(frame.to_string(index=False))
    codes = [int(c) for c in frame["exit_code"]] if not frame.empty else []
    return max(codes, default=0)


# =============================================================================
# ARGUMENT PARSING
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logs")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings only")

    parser = argparse.ArgumentParser(
        prog="hrflow", description="Homogeneous Ricci flow of awesome metrics"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--manifest", type=Path, required=True, help="Run manifest")
        p.add_argument("--out", type=Path, help="Output directory")
        p.add_argument("--seed", type=int, help="Override the manifest seed")
        p.add_argument("--tol", type=float, help="Relative tolerance of the flow")

    run_p = sub.add_parser("run", parents=[common], help="Run one manifest")
    add_run_args(run_p)

    check_p = sub.add_parser("check", parents=[common], help="Run check suites")
    check_p.add_argument("suite", nargs="?", default="all", choices=["all", *SUITES])
    check_p.add_argument("--seed", type=int, default=0)
    check_p.add_argument(
        "--einstein-floor",
        type=float,
        help="Smallest Einstein residual the random search may report",
    )

    sub.add_parser("catalog", parents=[common], help="List catalog spaces")

    sweep_p = sub.add_parser("sweep", parents=[common], help="Run many seeds")
    add_run_args(sweep_p)
    sweep_p.add_argument("--count", type=int, default=10, help="Number of seeds")
    sweep_p.add_argument("--batch", type=int, default=1, help="Worker processes")
    return parser


def main(argv: list[str] | None = None) -> int:
    """Run the application."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        _configure_logging(logging.DEBUG)
    elif args.quiet:
        _configure_logging(logging.WARNING)
    else:
        _configure_logging(logging.INFO)

    if args.command == "run":
        return run_cmd(args)
    if args.command == "check":
        tol = Tolerances()
        if args.einstein_floor is not None:
            tol = replace(tol, einstein_floor=args.einstein_floor)
        return check_command(args.suite, args.seed, tol)
    if args.command == "catalog":
        return catalog_command()
    return sweep_cmd(args)


if __name__ == "__main__":
    sys.exit(main())
