"""Scenario configuration: defaults, key-value file parsing, validation."""

from __future__ import annotations

import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .defense import DefenseMode
from .node import Mop


class ScenarioError(ValueError):
    """Invalid scenario file or value."""


@dataclass(frozen=True)
class Scenario:
    # topology and population
    arena: float = 150.0
    clients: int = 15
    servers: int = 1
    attackers: int = 4
    attack: bool = True
    # radio
    tx_range: float = 50.0
    interference_range: float = 100.0
    rx_success: float = 1.0
    queue_capacity: int = 8
    # mobility
    mobility: bool = False
    speed_min: float = 1.0
    speed_max: float = 2.0
    mobility_step: float = 1.0
    # traffic
    data_interval: float = 60.0
    data_size: int = 30
    duration: float = 1800.0
    mop: Mop = Mop.STORING
    # attack
    replay_interval: float = 1.0
    attack_start: float = 90.0
    # defense
    defense: DefenseMode = DefenseMode.NONE
    beta: int = 10
    activate_at: float = 120.0
    reinit_period: float = 1800.0
    secrpl_threshold: int = 10
    node_max: int = 0  # 0: size the tables for every node in the network
    warm_start: bool = False
    fpr_granularity: str = "node"
    # replication
    replications: int = 10
    base_seed: int = 1

    def __post_init__(self) -> None:
        validate(self)

    @property
    def total_nodes(self) -> int:
        return self.servers + self.clients + self.attackers

    @property
    def effective_node_max(self) -> int:
        return self.node_max or self.total_nodes

    def with_(self, **changes) -> Scenario:
        return replace(self, **changes)


def validate(s: Scenario) -> None:
    def need(cond: bool, msg: str) -> None:
        if not cond:
            raise ScenarioError(msg)

    need(s.arena > 0, "arena must be > 0")
    need(s.clients >= 1, "clients must be >= 1")
    need(s.servers == 1, "exactly one server (DODAG root) is supported")
    need(0 <= s.attackers <= s.clients, f"attackers ({s.attackers}) must be within [0, clients={s.clients}]")
    need(0 < s.tx_range <= s.interference_range, "need 0 < tx_range <= interference_range")
    need(0.0 <= s.rx_success <= 1.0, "rx_success must be within [0, 1]")
    need(s.queue_capacity >= 1, "queue_capacity must be >= 1")
    need(0 < s.speed_min <= s.speed_max, "need 0 < speed_min <= speed_max")
    need(s.mobility_step > 0, "mobility_step must be > 0")
    need(s.data_interval > 0, "data_interval must be > 0")
    need(s.data_size > 0, "data_size must be > 0")
    need(s.duration > 0, "duration must be > 0")
    need(s.replay_interval > 0, "replay_interval must be > 0")
    need(0 <= s.attack_start < s.duration, "attack_start must be within [0, duration)")
    need(s.beta >= 1, "beta must be >= 1")
    need(s.activate_at >= 0, "activate_at must be >= 0")
    need(s.reinit_period > 0, "reinit_period must be > 0")
    need(s.secrpl_threshold >= 1, "secrpl_threshold must be >= 1")
    need(s.node_max >= 0, "node_max must be >= 0")
    need(s.fpr_granularity in ("node", "event"), "fpr_granularity must be 'node' or 'event'")
    need(s.replications >= 1, "replications must be >= 1")


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}
_MOP_NAMES = {"none": Mop.NO_DOWNWARD, "nonstoring": Mop.NON_STORING, "non-storing": Mop.NON_STORING,
              "storing": Mop.STORING, "storing-multicast": Mop.STORING_MULTICAST}


def _convert(name: str, raw: str, typ):
    raw = raw.strip()
    if typ is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw.rstrip("s")) if raw.endswith("s") else float(raw)
    if typ is Mop:
        low = raw.lower()
        if low in _MOP_NAMES:
            return _MOP_NAMES[low]
        return Mop(int(raw))
    if typ is DefenseMode:
        return DefenseMode(raw.lower())
    return raw


_TYPES = {"bool": bool, "int": int, "float": float, "str": str,
          "Mop": Mop, "DefenseMode": DefenseMode}


def field_types() -> dict[str, type]:
    return {f.name: _TYPES[f.type] for f in fields(Scenario)}


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse ``key = value`` lines (``#`` starts a comment) over the defaults."""
    types = field_types()
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ScenarioError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ScenarioError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, raw, types[key])
        except ValueError as exc:
            raise ScenarioError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        lines[key] = lineno
    try:
        return Scenario(**values)
    except ScenarioError as exc:
        # messages name the offending key first; point at its line if it was set
        msg = str(exc)
        hits = [(m.start(), lineno) for key, lineno in lines.items()
                if (m := re.search(rf"\b{key}\b", msg))]
        if hits:
            raise ScenarioError(f"{source}:{min(hits)[1]}: {msg}") from None
        raise ScenarioError(f"{source}: {msg}") from None


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))


def dump_scenario(s: Scenario) -> str:
    out = []
    for f in fields(Scenario):
        v = getattr(s, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, Mop):
            v = {Mop.NO_DOWNWARD: "none", Mop.NON_STORING: "nonstoring",
                 Mop.STORING: "storing", Mop.STORING_MULTICAST: "storing-multicast"}[v]
        elif isinstance(v, DefenseMode):
            v = v.value
        out.append(f"{f.name} = {v}")
    return "\n".join(out) + "\n"
