"""Command-line entry point: ``rplsim simulate`` and ``rplsim report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiment import CellError, RunFailed, matrix, parse_cell, report, run_matrix
from .network import Network
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

log = logging.getLogger("rplsim")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rplsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario matrix or a single cell")
    sim.add_argument("--scenario", type=Path, help="key = value scenario file (defaults if omitted)")
    sim.add_argument("--cell", action="append", default=[],
                     help="run only this cell, e.g. limsd,static,1s (repeatable)")
    sim.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    sim.add_argument("--trace", action="store_true",
                     help="write a per-frame trace of the first replication of each cell")
    sim.add_argument("--seed", type=int, help="base seed (overrides the scenario)")
    sim.add_argument("--reps", type=int, help="replications per cell (overrides the scenario)")
    sim.add_argument("--jobs", type=int, default=1, help="worker processes")
    sim.add_argument("--mobility", choices=("static", "mobile", "both"), default="both",
                     help="which half of the matrix to run when no --cell is given")

    rep = sub.add_parser("report", help="rebuild figure tables from summary.csv")
    rep.add_argument("--in", dest="in_dir", type=Path, required=True, help="results directory")
    return p


def _write_traces(cells, base: Scenario, seed: int, out: Path) -> None:
    for cell in cells:
        name = cell.label.replace(",", "_")
        path = out / f"trace_{name}.log"
        with path.open("w", encoding="utf-8") as fh:
            Network(cell.scenario(base), seed, trace=lambda line: fh.write(line + "\n")).run()
        log.info("trace written to %s", path)


def cmd_simulate(args) -> int:
    try:
        base = load_scenario(args.scenario) if args.scenario else Scenario()
        if args.reps is not None and args.reps < 1:
            raise ScenarioError("--reps must be >= 1")
        if args.jobs < 1:
            raise ScenarioError("--jobs must be >= 1")
        if args.cell:
            cells = [parse_cell(spec) for spec in args.cell]
        else:
            mobs = ("static", "mobile") if args.mobility == "both" else (args.mobility,)
            cells = matrix(mobs)
    except (ScenarioError, CellError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    seed = base.base_seed if args.seed is None else args.seed
    try:
        records = run_matrix(cells, base, args.out, reps=args.reps, base_seed=seed, jobs=args.jobs)
        if args.trace:
            _write_traces(cells, base, seed, args.out)
    except RunFailed as exc:
        print(f"error: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{len(records)} runs over {len(cells)} cells written to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    if not (args.in_dir / "summary.csv").is_file():
        print(f"error: {args.in_dir / 'summary.csv'} not found", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        paths = report(args.in_dir)
    except (KeyError, ValueError) as exc:
        print(f"error: malformed summary.csv: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for path in paths:
        print(path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "simulate":
        return cmd_simulate(args)
    return cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
