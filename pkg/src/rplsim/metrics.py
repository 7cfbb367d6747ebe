"""Per-run counters and cross-replication statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import fmean, stdev
from typing import Iterable, Sequence

from scipy import stats

VOLTAGE_V = 3.0
CURRENT_MA = {"tx": 17.4, "rx": 18.8, "cpu": 1.8, "lpm": 0.0545}
POWER_MW = {state: ma * VOLTAGE_V for state, ma in CURRENT_MA.items()}
US_PER_S = 1_000_000


class MetricUndefined(ValueError):
    """The metric has no value for this run (e.g. nothing was sent)."""


@dataclass
class EnergyLedger:
    """Time per state in whole microseconds."""

    tx_us: int = 0
    rx_us: int = 0
    cpu_us: int = 0
    lpm_us: int = 0

    @classmethod
    def from_seconds(cls, tx: float, rx: float, cpu: float, lpm: float) -> EnergyLedger:
        return cls(*(round(x * US_PER_S) for x in (tx, rx, cpu, lpm)))

    def total_us(self) -> int:
        return self.tx_us + self.rx_us + self.cpu_us + self.lpm_us

    def energy_mj(self) -> float:
        return (self.tx_us * POWER_MW["tx"] + self.rx_us * POWER_MW["rx"]
                + self.cpu_us * POWER_MW["cpu"] + self.lpm_us * POWER_MW["lpm"]) / US_PER_S


@dataclass
class RunMetrics:
    duration: float = 0.0
    duration_us: int = 0
    root: int = 0
    data_sent: int = 0
    data_received: int = 0
    delays: list[float] = field(default_factory=list)
    attacker_data_sent: int = 0
    attacker_data_received: int = 0
    energy: dict[int, EnergyLedger] = field(default_factory=dict)
    control: dict[str, int] = field(default_factory=dict)
    node_counters: dict[int, dict[str, int]] = field(default_factory=dict)
    blacklist_events: list[tuple[float, int, int]] = field(default_factory=list)
    ground_truth_attackers: frozenset[int] = frozenset()
    legitimate_nodes: frozenset[int] = frozenset()
    tally: dict[str, tuple[int, int, int]] = field(default_factory=dict)
    drop_reasons: dict[str, int] = field(default_factory=dict)
    replays_attempted: int = 0
    replays_sent: int = 0
    dao_decisions_legit: int = 0
    dao_rejections_legit: int = 0
    defense_work_violations: int = 0
    table_bytes: int = 0
    initialize_calls: int = 0
    events_processed: int = 0

    def count(self, key: str, n: int = 1) -> None:
        self.control[key] = self.control.get(key, 0) + n


def pdr(run: RunMetrics) -> float:
    if run.data_sent == 0:
        raise MetricUndefined("no data packets sent")
    return run.data_received / run.data_sent


def plr(run: RunMetrics) -> float:
    if run.data_sent == 0:
        raise MetricUndefined("no data packets sent")
    return (run.data_sent - run.data_received) / run.data_sent


def ae2ed(run: RunMetrics) -> float:
    if not run.delays:
        raise MetricUndefined("no data packets delivered")
    return fmean(run.delays)


def apc(run: RunMetrics) -> float:
    """Mean power in mW over non-root nodes."""
    nodes = [n for n in run.energy if n != run.root]
    if not nodes or run.duration <= 0:
        raise MetricUndefined("no non-root nodes or zero duration")
    return fmean(run.energy[n].energy_mj() / run.duration for n in nodes)


def fpr(run: RunMetrics, granularity: str = "node") -> float:
    """Share of legitimate instances that some parent blocked.

    ``granularity="node"``: an instance is a legitimate node, flagged if it was
    ever the target of a block/blacklist event. ``"event"``: an instance is a
    DAO decision about a legitimate sender, flagged if the DAO was rejected.
    """
    if granularity == "event":
        if run.dao_decisions_legit == 0:
            return 0.0
        return run.dao_rejections_legit / run.dao_decisions_legit
    legit = run.legitimate_nodes
    if not legit:
        raise MetricUndefined("no legitimate nodes")
    blocked = {target for _, _, target in run.blacklist_events} & legit
    return len(blocked) / len(legit)


METRICS = {"pdr": pdr, "plr": plr, "ae2ed": ae2ed, "apc": apc, "fpr": fpr}


def metric_values(run: RunMetrics) -> dict[str, float | None]:
    """All headline metrics for a run; undefined ones map to None."""
    out: dict[str, float | None] = {}
    for name, fn in METRICS.items():
        try:
            out[name] = fn(run)
        except MetricUndefined:
            out[name] = None
    return out


@dataclass(frozen=True)
class Summary:
    mean: float
    ci95: float | None
    n: int


def summarize(values: Sequence[float], confidence: float = 0.95) -> Summary:
    """Mean and Student-t confidence half-width (omitted for fewer than 2 values)."""
    vals = [v for v in values if v is not None and not math.isnan(v)]
    if not vals:
        raise MetricUndefined("no values to aggregate")
    vals.sort()  # permutation invariance down to the last bit
    m = fmean(vals)
    if len(vals) < 2:
        return Summary(m, None, 1)
    t = stats.t.ppf(0.5 + confidence / 2.0, len(vals) - 1)
    return Summary(m, float(t * stdev(vals) / math.sqrt(len(vals))), len(vals))


def aggregate(runs: Iterable[RunMetrics]) -> dict[str, Summary | None]:
    per_metric: dict[str, list[float]] = {name: [] for name in METRICS}
    for run in runs:
        for name, v in metric_values(run).items():
            if v is not None:
                per_metric[name].append(v)
    return {name: (summarize(v) if v else None) for name, v in per_metric.items()}
