"""Parent-side DAO admission control.

Two policies share one decision interface, consulted before a parent does
anything with a received DAO:

* :class:`LiMsd` counts DAOs per child, but only those the child originated
  itself (``dao_prefix`` equal to the child's global address). A child that
  reaches ``beta`` originated DAOs is put on a blacklist that is checked
  before any other work on later DAOs. DAOs a child merely forwards on
  behalf of descendants are passed on without being counted, so honest
  forwarders are never blamed for a flooding descendant.
* :class:`SecRpl` counts every DAO from a child and blocks the child once
  its counter reaches the threshold. All counters and blocks are cleared
  whenever the parent sends a DIO.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from .messages import GlobalPrefix, NodeAddress

log = logging.getLogger(__name__)

# bytes per table entry on a 16-bit mote: two IPv6 addresses + 16-bit counter
NEIGHBOR_ENTRY_BYTES = 16 + 16 + 2
BLACKLIST_ENTRY_BYTES = 16


class DefenseMode(str, Enum):
    NONE = "none"
    LIMSD = "limsd"
    SECRPL = "secrpl"


class DaoVerdict(str, Enum):
    FORWARD = "Forward"
    FORWARD_UNCOUNTED = "ForwardUncounted"
    DISCARD = "Discard"
    BLACKLIST_AND_DISCARD = "BlacklistAndDiscard"

    @property
    def accepted(self) -> bool:
        return self in (DaoVerdict.FORWARD, DaoVerdict.FORWARD_UNCOUNTED)


@dataclass(frozen=True)
class DefenseConfig:
    mode: DefenseMode = DefenseMode.NONE
    beta: int = 10
    activate_at: float = 120.0
    reinit_period: float = 1800.0
    secrpl_threshold: int = 10
    node_max: int = 20
    # also count originated DAOs seen before activate_at (blacklisting still waits)
    warm_start: bool = False

    def __post_init__(self) -> None:
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.activate_at < 0:
            raise ValueError("activate_at must be >= 0")
        if self.reinit_period <= 0:
            raise ValueError("reinit_period must be > 0")
        if self.secrpl_threshold < 1:
            raise ValueError("secrpl_threshold must be >= 1")
        if self.node_max < 1:
            raise ValueError("node_max must be >= 1")


@dataclass(slots=True)
class NeighborEntry:
    sender: NodeAddress
    global_id: GlobalPrefix
    dao_count: int = 0


@dataclass(frozen=True, slots=True)
class Decision:
    time: float
    sender: int
    dao_prefix: int
    verdict: DaoVerdict
    dao_count: int
    n_blacklist: int
    t_child: int
    comparisons: int


@dataclass(frozen=True, slots=True)
class BlockEvent:
    time: float
    parent: int
    target: int


@dataclass
class _Base:
    owner: int
    config: DefenseConfig
    decisions: list[Decision] = field(default_factory=list)
    blocks: list[BlockEvent] = field(default_factory=list)
    record_decisions: bool = True

    def _log(self, now, sender, prefix, verdict, count, nb, tc, comps) -> None:
        if self.record_decisions:
            self.decisions.append(
                Decision(now, sender.node_id, prefix.iid, verdict, count, nb, tc, comps))

    def table_bytes(self) -> int:
        return 0


class LiMsd(_Base):
    """Per-node Li-MSD state: neighbor table Q and blacklist Z."""

    def __init__(self, owner: int, config: DefenseConfig, record_decisions: bool = True):
        super().__init__(owner, config, record_decisions=record_decisions)
        self.neighbors: list[NeighborEntry] = []
        self.blacklist: list[NodeAddress] = []
        self.initialize_calls = 0
        self.last_comparisons = 0
        self.max_comparison_excess = 0
        self.evictions = 0
        self.initialize()

    @property
    def n_blacklist(self) -> int:
        return len(self.blacklist)

    @property
    def t_child(self) -> int:
        return len(self.neighbors)

    def initialize(self) -> None:
        """Clear both tables; runs at boot and again every ``reinit_period``."""
        self.neighbors = []
        self.blacklist = []
        self.initialize_calls += 1

    def search_blacklist(self, sender: NodeAddress) -> bool:
        """Linear scan of Z; sets ``last_comparisons`` to the entries examined."""
        comps = 0
        found = False
        for entry in self.blacklist:
            comps += 1
            if entry == sender:
                found = True
                break
        self.last_comparisons = comps
        return found

    def _add_neighbor(self, sender: NodeAddress) -> NeighborEntry:
        if len(self.neighbors) >= self.config.node_max:
            victim = min(self.neighbors, key=lambda e: e.dao_count)
            self.neighbors.remove(victim)
            self.evictions += 1
            log.info("node %d: neighbor table full, evicted %s (count %d)",
                     self.owner, victim.sender, victim.dao_count)
        # global id is bound from the link-local identity, never from a DAO
        entry = NeighborEntry(sender, sender.global_prefix, 0)
        self.neighbors.append(entry)
        return entry

    def _blacklist_add(self, sender: NodeAddress, now: float) -> None:
        if len(self.blacklist) >= self.config.node_max:
            log.warning("node %d: blacklist full, %s not recorded", self.owner, sender)
            return
        self.blacklist.append(sender)
        self.blocks.append(BlockEvent(now, self.owner, sender.node_id))

    def on_dao(self, sender: NodeAddress, dao_prefix: GlobalPrefix, now: float) -> DaoVerdict:
        cfg = self.config
        active = now >= cfg.activate_at
        nb_before = len(self.blacklist)
        tc_before = len(self.neighbors)

        if active and self.search_blacklist(sender):
            comps = self.last_comparisons
            self._finish(comps, nb_before, tc_before)
            self._log(now, sender, dao_prefix, DaoVerdict.DISCARD, -1, nb_before, tc_before, comps)
            return DaoVerdict.DISCARD
        comps = self.last_comparisons if active else 0

        entry = None
        for e in self.neighbors:
            comps += 1
            if e.sender == sender:
                entry = e
                break
        if entry is None:
            if not active and not cfg.warm_start:
                self._finish(comps, nb_before, tc_before)
                self._log(now, sender, dao_prefix, DaoVerdict.FORWARD, 0, nb_before, tc_before, comps)
                return DaoVerdict.FORWARD
            entry = self._add_neighbor(sender)

        if dao_prefix != entry.global_id:
            verdict = DaoVerdict.FORWARD_UNCOUNTED
        elif entry.dao_count < cfg.beta:
            if active or cfg.warm_start:
                entry.dao_count += 1
            verdict = DaoVerdict.FORWARD
        elif active:
            self._blacklist_add(sender, now)
            verdict = DaoVerdict.BLACKLIST_AND_DISCARD
        else:
            verdict = DaoVerdict.FORWARD
        self._finish(comps, nb_before, tc_before)
        self._log(now, sender, dao_prefix, verdict, entry.dao_count,
                  len(self.blacklist), len(self.neighbors), comps)
        return verdict

    def _finish(self, comps: int, nb: int, tc: int) -> None:
        self.last_comparisons = comps
        excess = comps - (nb + tc)
        if excess > self.max_comparison_excess:
            self.max_comparison_excess = excess

    def on_dio_sent(self, now: float) -> None:
        pass

    def table_bytes(self) -> int:
        return (len(self.neighbors) * NEIGHBOR_ENTRY_BYTES
                + len(self.blacklist) * BLACKLIST_ENTRY_BYTES)


class SecRpl(_Base):
    """Per-child DAO counters, reset whenever this parent sends a DIO."""

    def __init__(self, owner: int, config: DefenseConfig, record_decisions: bool = True):
        super().__init__(owner, config, record_decisions=record_decisions)
        self.counters: dict[NodeAddress, int] = {}
        self.blocked: set[NodeAddress] = set()
        self.resets = 0

    def on_dao(self, sender: NodeAddress, dao_prefix: GlobalPrefix, now: float) -> DaoVerdict:
        if now < self.config.activate_at:
            self._log(now, sender, dao_prefix, DaoVerdict.FORWARD, 0, 0, len(self.counters), 0)
            return DaoVerdict.FORWARD
        count = self.counters.get(sender, 0)
        if count >= self.config.secrpl_threshold:
            if sender not in self.blocked:
                self.blocked.add(sender)
                self.blocks.append(BlockEvent(now, self.owner, sender.node_id))
            verdict = DaoVerdict.DISCARD
        else:
            count += 1
            self.counters[sender] = count
            verdict = DaoVerdict.FORWARD
        self._log(now, sender, dao_prefix, verdict, count, len(self.blocked),
                  len(self.counters), 0)
        return verdict

    def on_dio_sent(self, now: float) -> None:
        if self.counters or self.blocked:
            self.counters.clear()
            self.blocked.clear()
        self.resets += 1

    def table_bytes(self) -> int:
        return len(self.counters) * (16 + 2)


def make_defense(owner: int, config: DefenseConfig, record_decisions: bool = True):
    if config.mode is DefenseMode.LIMSD:
        return LiMsd(owner, config, record_decisions)
    if config.mode is DefenseMode.SECRPL:
        return SecRpl(owner, config, record_decisions)
    return None
