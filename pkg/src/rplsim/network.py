"""Build one simulated network from a scenario and run it to completion."""

from __future__ import annotations

import logging
import math
import random
from collections import deque
from typing import Callable, Sequence

from .adversary import AttackConfig, Attacker, arm, select_attackers
from .defense import DaoVerdict, DefenseConfig, DefenseMode, LiMsd, make_defense
from .engine import EventKind, RngStreams, Simulator
from .messages import Dao, DataPacket
from .metrics import US_PER_S, EnergyLedger, RunMetrics
from .mobility import RandomWaypoint
from .node import RplNode
from .radio import EnergyBook, Medium, RadioModel
from .scenario import Scenario

log = logging.getLogger(__name__)

ROOT_ID = 0
MAX_PLACEMENT_TRIES = 10_000


def connected(positions: dict[int, Sequence[float]], tx_range: float, root: int = ROOT_ID) -> bool:
    seen = {root}
    todo = deque([root])
    while todo:
        a = todo.popleft()
        ax, ay = positions[a]
        for b, (bx, by) in positions.items():
            if b not in seen and math.hypot(ax - bx, ay - by) <= tx_range:
                seen.add(b)
                todo.append(b)
    return len(seen) == len(positions)


def random_topology(n_clients: int, arena: float, tx_range: float,
                    rng: random.Random) -> dict[int, list[float]]:
    """Root at the arena centre, clients uniform; resample until connected."""
    for _ in range(MAX_PLACEMENT_TRIES):
        pos = {ROOT_ID: [arena / 2.0, arena / 2.0]}
        for i in range(1, n_clients + 1):
            pos[i] = [rng.uniform(0.0, arena), rng.uniform(0.0, arena)]
        if connected(pos, tx_range):
            return pos
    raise RuntimeError("could not draw a connected topology")


class Network:
    """All nodes, the medium and the metrics of one replication.

    ``positions`` and ``attackers`` override the random topology and the
    random attacker pick, which is how hand-built test topologies are run.
    """

    def __init__(
        self,
        scenario: Scenario,
        seed: int,
        *,
        positions: dict[int, list[float]] | None = None,
        attackers: Sequence[int] | None = None,
        trace: Callable[[str], None] | None = None,
        record_decisions: bool = False,
    ) -> None:
        self.scenario = scenario
        self.seed = seed
        self.streams = RngStreams(seed)
        self.sim = Simulator()
        self.radio = RadioModel(scenario.tx_range, scenario.interference_range,
                                scenario.rx_success, scenario.queue_capacity)
        self.data_size = scenario.data_size
        n_clients = scenario.clients + scenario.attackers
        if positions is None:
            positions = random_topology(n_clients, scenario.arena, scenario.tx_range,
                                        self.rng("topology"))
        self.positions = {k: list(v) for k, v in positions.items()}
        client_ids = sorted(k for k in self.positions if k != ROOT_ID)

        # drawn unconditionally so every cell of a seed shares the same pick
        picked = select_attackers(client_ids, min(scenario.attackers, len(client_ids)),
                                  self.rng("attackers"))
        if attackers is not None:
            picked = sorted(attackers)
        self.attacker_ids: frozenset[int] = frozenset(picked) if scenario.attack else frozenset()

        self.energy = EnergyBook(self.positions)
        self.medium = Medium(self.sim, self.radio, self.positions, self.rng("radio"),
                             lambda src, cls: self.rng(f"mac:{src}:{cls}"),
                             self.energy, self._on_receive, trace=trace)
        self.defense_config = DefenseConfig(
            mode=scenario.defense, beta=scenario.beta, activate_at=scenario.activate_at,
            reinit_period=scenario.reinit_period, secrpl_threshold=scenario.secrpl_threshold,
            node_max=scenario.effective_node_max, warm_start=scenario.warm_start)
        self.nodes: dict[int, RplNode] = {}
        for nid in sorted(self.positions):
            defense = make_defense(nid, self.defense_config, record_decisions)
            self.nodes[nid] = RplNode(self, nid, is_root=(nid == ROOT_ID),
                                      mop=scenario.mop, defense=defense)
        self.root = self.nodes[ROOT_ID]
        self.attackers: dict[int, Attacker] = {}
        self.metrics = RunMetrics(duration=scenario.duration, root=ROOT_ID,
                                  ground_truth_attackers=self.attacker_ids,
                                  legitimate_nodes=frozenset(client_ids) - self.attacker_ids)
        self.mobility: RandomWaypoint | None = None
        self._started = False

    # -- plumbing -------------------------------------------------------------
    def rng(self, name: str) -> random.Random:
        return self.streams.stream(name)

    def _on_receive(self, dst: int, src: int, msg) -> None:
        self.nodes[dst].on_frame(src, msg)

    # -- callbacks from nodes --------------------------------------------------
    def on_join(self, node: RplNode) -> None:
        node._trickle_begin()

    def on_verdict(self, node: RplNode, src: int, verdict: DaoVerdict) -> None:
        if src in self.metrics.legitimate_nodes:
            self.metrics.dao_decisions_legit += 1
            if not verdict.accepted:
                self.metrics.dao_rejections_legit += 1
        d = node.defense
        if isinstance(d, LiMsd) and d.last_comparisons > d.n_blacklist + d.t_child:
            self.metrics.defense_work_violations += 1

    def on_dao_forwarded(self, node: RplNode, dao: Dao) -> None:
        self.metrics.count("dao_induced")

    def on_root_dao(self, node: RplNode, src: int, dao: Dao) -> None:
        self.metrics.count("dao_at_root")

    def on_data_sent(self, node: RplNode, pkt: DataPacket) -> None:
        if node.id in self.attacker_ids:
            self.metrics.attacker_data_sent += 1
        else:
            self.metrics.data_sent += 1

    def on_data_received(self, root: RplNode, pkt: DataPacket) -> None:
        if pkt.origin in self.attacker_ids:
            self.metrics.attacker_data_received += 1
        else:
            self.metrics.data_received += 1
            self.metrics.delays.append(self.sim.now - pkt.created_at)

    # -- periodic activities ---------------------------------------------------
    def _data_tick(self, node: RplNode) -> None:
        node.generate_data()
        self.sim.schedule_in(self.scenario.data_interval, EventKind.DATA_GENERATION,
                             self._data_tick, node)

    def _mobility_tick(self) -> None:
        dt = self.scenario.mobility_step
        now = self.sim.now
        for nid in sorted(self.mobility.states):
            self.mobility.step(nid, self.positions[nid], dt, now)
        self.medium.positions_changed()
        self.sim.schedule_in(dt, EventKind.MOBILITY_STEP, self._mobility_tick)

    def mobility_step(self, node: int, dt: float) -> list[float]:
        """Advance one node; exposed for direct use in tests."""
        pos = self.mobility.step(node, self.positions[node], dt, self.sim.now)
        self.medium.positions_changed()
        return pos

    def _reinit(self, node: RplNode) -> None:
        node.defense.initialize()
        self.sim.schedule_in(self.defense_config.reinit_period, EventKind.DEFENSE_REINIT,
                             self._reinit, node)

    # -- run -------------------------------------------------------------------
    def start(self) -> None:
        if self._started:
            return
        self._started = True
        sc = self.scenario
        for nid in sorted(self.nodes):
            self.nodes[nid].start()
        jitter = self.rng("data")
        for nid in sorted(self.nodes):
            if nid == ROOT_ID:
                continue
            first = jitter.uniform(0.0, sc.data_interval)
            self.sim.schedule(first, EventKind.DATA_GENERATION, self._data_tick, self.nodes[nid])
        if sc.mobility:
            self.mobility = RandomWaypoint(self.rng("mobility"), sc.arena, sc.speed_min, sc.speed_max)
            for nid in sorted(self.nodes):
                if nid != ROOT_ID:
                    self.mobility.add(nid)
            self.sim.schedule(sc.mobility_step, EventKind.MOBILITY_STEP, self._mobility_tick)
        if sc.defense is DefenseMode.LIMSD:
            for nid in sorted(self.nodes):
                self.sim.schedule(self.defense_config.reinit_period, EventKind.DEFENSE_REINIT,
                                  self._reinit, self.nodes[nid])
        if sc.attack:
            cfg = AttackConfig(sc.replay_interval, sc.attack_start, len(self.attacker_ids))
            for nid in sorted(self.attacker_ids):
                self.attackers[nid] = arm(self.nodes[nid], cfg)

    def run(self) -> RunMetrics:
        self.start()
        self.sim.run_until(self.scenario.duration)
        return self.collect()

    def collect(self) -> RunMetrics:
        m = self.metrics
        self.medium.finalize()
        duration_us = m.duration_us = round(self.scenario.duration * US_PER_S)
        m.events_processed = self.sim.processed
        for nid in sorted(self.nodes):
            lpm = self.energy.lpm_us(nid, duration_us)
            if lpm < 0:
                raise RuntimeError(f"node {nid}: busy time exceeds run duration")
            m.energy[nid] = EnergyLedger(self.energy.tx_us[nid], self.energy.rx_us[nid],
                                         self.energy.cpu_us[nid], lpm)
            node = self.nodes[nid]
            m.node_counters[nid] = dict(sorted(node.counters.items()))
            for key, n in node.counters.items():
                m.count(key, n)
            if node.defense is not None:
                m.blacklist_events.extend((b.time, b.parent, b.target) for b in node.defense.blocks)
                m.table_bytes += node.defense.table_bytes()
                if isinstance(node.defense, LiMsd):
                    m.initialize_calls = max(m.initialize_calls, node.defense.initialize_calls)
        m.blacklist_events.sort()
        m.control = dict(sorted(m.control.items()))
        m.tally = dict(sorted(self.medium.tally.by_class().items()))
        m.drop_reasons = dict(sorted(self.medium.tally.drop_reasons.items()))
        m.replays_attempted = sum(a.attempted for a in self.attackers.values())
        m.replays_sent = sum(a.sent for a in self.attackers.values())
        return m


def run_once(scenario: Scenario, seed: int, **kwargs) -> RunMetrics:
    return Network(scenario, seed, **kwargs).run()
