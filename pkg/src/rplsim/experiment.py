"""Experiment matrix: cells, replications, CSV output and figure tables."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .defense import DefenseMode
from .metrics import METRICS, MetricUndefined, RunMetrics, Summary, fpr, metric_values, summarize
from .network import run_once
from .scenario import Scenario

log = logging.getLogger(__name__)

DEFENSES = ("rpl", "underattack", "limsd", "secrpl")
REPLAY_INTERVALS = (1.0, 2.0, 4.0, 8.0)
MOBILITIES = ("static", "mobile")
RUNS_COLUMNS = ("cell", "defense", "mobility", "replay_interval", "replication", "seed",
                "metric", "value")
SUMMARY_COLUMNS = ("cell", "defense", "mobility", "replay_interval", "metric", "mean",
                   "ci95", "n")
FIGURE_METRICS = ("pdr", "ae2ed", "apc", "plr")


class CellError(ValueError):
    pass


class RunFailed(RuntimeError):
    def __init__(self, cell: Cell, seed: int, cause: BaseException) -> None:
        super().__init__(f"cell {cell.label} seed {seed}: {type(cause).__name__}: {cause}")
        self.cell = cell
        self.seed = seed


@dataclass(frozen=True, order=True)
class Cell:
    """One point of the matrix. The ``rpl`` row has no attacker, so no interval."""

    defense: str
    mobility: str
    replay_interval: float | None = None

    def __post_init__(self) -> None:
        if self.defense not in DEFENSES:
            raise CellError(f"unknown defense {self.defense!r}; expected one of {DEFENSES}")
        if self.mobility not in MOBILITIES:
            raise CellError(f"unknown mobility {self.mobility!r}; expected static or mobile")
        if self.defense == "rpl":
            object.__setattr__(self, "replay_interval", None)
        elif self.replay_interval is None or self.replay_interval <= 0:
            raise CellError(f"{self.defense} needs a positive replay interval")

    @property
    def label(self) -> str:
        if self.replay_interval is None:
            return f"{self.defense},{self.mobility}"
        return f"{self.defense},{self.mobility},{_fmt_interval(self.replay_interval)}s"

    def scenario(self, base: Scenario) -> Scenario:
        changes: dict = {"mobility": self.mobility == "mobile"}
        if self.defense == "rpl":
            changes.update(attack=False, defense=DefenseMode.NONE)
        else:
            changes.update(attack=True, replay_interval=self.replay_interval,
                           defense={"underattack": DefenseMode.NONE,
                                    "limsd": DefenseMode.LIMSD,
                                    "secrpl": DefenseMode.SECRPL}[self.defense])
        return base.with_(**changes)


def _fmt_interval(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def parse_cell(spec: str) -> Cell:
    """``"limsd,static,1s"``, ``"underattack,mobile,2"`` or ``"rpl,static"``."""
    parts = [p.strip().lower() for p in spec.split(",")]
    if len(parts) not in (2, 3):
        raise CellError(f"bad cell spec {spec!r}; expected defense,mobility[,interval]")
    interval = None
    if len(parts) == 3:
        raw = parts[2].removesuffix("s")
        try:
            interval = float(raw)
        except ValueError:
            raise CellError(f"bad replay interval {parts[2]!r} in {spec!r}") from None
    return Cell(parts[0], parts[1], interval)


def matrix(mobilities: Iterable[str] = MOBILITIES,
           intervals: Sequence[float] = REPLAY_INTERVALS) -> list[Cell]:
    cells = []
    for mob in mobilities:
        cells.append(Cell("rpl", mob))
        for d in DEFENSES[1:]:
            cells.extend(Cell(d, mob, ri) for ri in intervals)
    return cells


@dataclass
class RunRecord:
    cell: Cell
    replication: int
    seed: int
    metrics: RunMetrics
    values: dict[str, float | None]


def _run(args: tuple[Scenario, int]) -> RunMetrics:
    scenario, seed = args
    return run_once(scenario, seed)


def run_cells(cells: Sequence[Cell], base: Scenario, reps: int | None = None,
              base_seed: int | None = None, jobs: int = 1) -> list[RunRecord]:
    """Run every cell for ``reps`` replications; seed of replication r is base_seed + r."""
    reps = base.replications if reps is None else reps
    base_seed = base.base_seed if base_seed is None else base_seed
    tasks = [(cell, r, base_seed + r) for cell in cells for r in range(reps)]
    args = [(cell.scenario(base), seed) for cell, _, seed in tasks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run, a) for a in args]
            results = []
            for (cell, _, seed), fut in zip(tasks, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    raise RunFailed(cell, seed, exc) from exc
    else:
        results = []
        for (cell, _, seed), a in zip(tasks, args):
            try:
                results.append(_run(a))
            except Exception as exc:
                raise RunFailed(cell, seed, exc) from exc
    records = []
    for (cell, r, seed), m in zip(tasks, results):
        values = metric_values(m)
        try:
            values["fpr"] = fpr(m, cell.scenario(base).fpr_granularity)
        except MetricUndefined:
            values["fpr"] = None
        records.append(RunRecord(cell, r, seed, m, values))
        log.debug("%s rep %d seed %d: %s", cell.label, r, seed, values)
    return records


def _interval_field(cell: Cell) -> str:
    return "" if cell.replay_interval is None else repr(float(cell.replay_interval))


def _value_field(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def runs_rows(records: Iterable[RunRecord]) -> list[list[str]]:
    rows = []
    for rec in records:
        c = rec.cell
        for name in METRICS:
            rows.append([c.label, c.defense, c.mobility, _interval_field(c), str(rec.replication),
                         str(rec.seed), name, _value_field(rec.values.get(name))])
    return rows


def summarize_records(records: Sequence[RunRecord]) -> dict[tuple[Cell, str], Summary | None]:
    out: dict[tuple[Cell, str], Summary | None] = {}
    cells = sorted({rec.cell for rec in records})
    for cell in cells:
        mine = sorted((r for r in records if r.cell == cell), key=lambda r: r.replication)
        for name in METRICS:
            vals = [r.values[name] for r in mine if r.values.get(name) is not None]
            out[(cell, name)] = summarize(vals) if vals else None
    return out


def summary_rows(records: Sequence[RunRecord]) -> list[list[str]]:
    rows = []
    for (cell, name), s in summarize_records(records).items():
        if s is None:
            rows.append([cell.label, cell.defense, cell.mobility, _interval_field(cell), name,
                         "", "", "0"])
        else:
            rows.append([cell.label, cell.defense, cell.mobility, _interval_field(cell), name,
                         repr(s.mean), _value_field(s.ci95), str(s.n)])
    return rows


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_matrix(cells: Sequence[Cell], base: Scenario, out_dir: str | Path, *,
               reps: int | None = None, base_seed: int | None = None,
               jobs: int = 1) -> list[RunRecord]:
    """Run the cells, then write runs.csv, summary.csv and the report files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_cells(cells, base, reps, base_seed, jobs)
    _write_csv(out / "runs.csv", RUNS_COLUMNS, runs_rows(records))
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows(records))
    report(out)
    return records


# -- reporting -------------------------------------------------------------------

def read_summary(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _series_label(defense: str) -> str:
    return {"rpl": "RPL", "underattack": "RPL_UnderAttack", "limsd": "RPL_LiMsd",
            "secrpl": "RPL_SecRPL"}[defense]


def report(in_dir: str | Path) -> list[Path]:
    """Per-figure tables from summary.csv: one row per replay interval, one
    mean/ci95 column pair per defense. Missing cells stay empty."""
    in_dir = Path(in_dir)
    rows = read_summary(in_dir / "summary.csv")
    index: dict[tuple[str, str, str, str], dict[str, str]] = {}
    intervals: set[float] = set()
    for row in rows:
        index[(row["defense"], row["mobility"], row["replay_interval"], row["metric"])] = row
        if row["replay_interval"]:
            intervals.add(float(row["replay_interval"]))
    ordered = sorted(intervals)
    written = []

    def lookup(defense, mob, ri, metric) -> tuple[str, str]:
        key_ri = "" if defense == "rpl" else repr(ri)
        row = index.get((defense, mob, key_ri, metric))
        if row is None:
            return "", ""
        return row["mean"], row["ci95"]

    for mob in MOBILITIES:
        for metric in FIGURE_METRICS:
            header = ["replay_interval"]
            for d in DEFENSES:
                header += [f"{_series_label(d)}_mean", f"{_series_label(d)}_ci95"]
            body = []
            for ri in ordered:
                line = [_fmt_interval(ri)]
                for d in DEFENSES:
                    line += list(lookup(d, mob, ri, metric))
                body.append(line)
            path = in_dir / f"fig_{metric}_{mob}.csv"
            _write_csv(path, header, body)
            written.append(path)

    header = ["mobility", "replay_interval", "RPL_LiMsd_mean", "RPL_LiMsd_ci95",
              "RPL_SecRPL_mean", "RPL_SecRPL_ci95"]
    body = []
    for mob in MOBILITIES:
        for ri in ordered:
            body.append([mob, _fmt_interval(ri), *lookup("limsd", mob, ri, "fpr"),
                         *lookup("secrpl", mob, ri, "fpr")])
    path = in_dir / "table_fpr.csv"
    _write_csv(path, header, body)
    written.append(path)

    path = in_dir / "comparison.txt"
    path.write_text(comparison_text(index, ordered), encoding="utf-8")
    written.append(path)
    return written


def comparison_text(index, intervals: Sequence[float]) -> str:
    """Fixed-width tables: metric rows per scenario, one column per replay interval."""
    lines = []
    for mob in MOBILITIES:
        for metric in (*FIGURE_METRICS, "fpr"):
            lines.append(f"{metric.upper()} ({mob})")
            lines.append(f"  {'series':<18}" + "".join(f"{_fmt_interval(ri) + ' s':>22}" for ri in intervals))
            for d in DEFENSES:
                cells = []
                for ri in intervals:
                    key_ri = "" if d == "rpl" else repr(ri)
                    row = index.get((d, mob, key_ri, metric))
                    if row is None or row["mean"] == "":
                        cells.append(f"{'-':>22}")
                    else:
                        ci = row["ci95"]
                        txt = f"{float(row['mean']):.4f}"
                        if ci:
                            txt += f" +/- {float(ci):.4f}"
                        cells.append(f"{txt:>22}")
                lines.append(f"  {_series_label(d):<18}" + "".join(cells))
            lines.append("")
    return "\n".join(lines)
