"""Per-node RPL state machine: joining, MRHOF parent selection, trickle DIOs,
DAO handling in storing and non-storing mode, and the upward data path."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import TYPE_CHECKING

from .defense import DaoVerdict
from .engine import EventKind
from .messages import (
    INFINITE_RANK, MIN_HOP_RANK_INCREASE, ROOT_RANK, Dao, DaoAck, DataPacket,
    Dio, Dis, GlobalPrefix, MsgClass, NodeAddress,
)
from .radio import CPU_PER_MESSAGE_US, Dropped, DropReason
from .trickle import TrickleState

if TYPE_CHECKING:
    from .network import Network

log = logging.getLogger(__name__)

PARENT_SWITCH_THRESHOLD = 192
ETX_ALPHA = 0.1
MAX_LINK_ETX = 8.0
DAO_ACK_TIMEOUT_S = 4.0
DAO_MAX_RETRIES = 2
DAO_LATENCY_S = 1.0
DAO_ROUTE_LIFETIME_S = 1800.0
# after losing the preferred parent, candidates not heard from within this
# window are assumed to have moved away too
CANDIDATE_FRESH_S = 30.0
DIS_START_DELAY_S = 5.0
DIS_INTERVAL_S = 10.0
DATA_HOP_LIMIT = 32
ROUTE_TABLE_SIZE = 32


class Mop(IntEnum):
    NO_DOWNWARD = 0
    NON_STORING = 1
    STORING = 2
    STORING_MULTICAST = 3

    @property
    def storing(self) -> bool:
        return self in (Mop.STORING, Mop.STORING_MULTICAST)


class DaoReason(str, Enum):
    DIO_REFRESH = "DioRefresh"
    PARENT_CHANGE = "ParentChange"
    ROUTE_ERROR = "RouteError"


_REASON_PRIORITY = {DaoReason.DIO_REFRESH: 0, DaoReason.ROUTE_ERROR: 1, DaoReason.PARENT_CHANGE: 2}


@dataclass(slots=True)
class Candidate:
    rank: int
    link_etx: float = 1.0
    delivery_ratio: float = 1.0
    heard_at: float = 0.0

    def path_cost(self) -> int:
        return self.rank + rank_increment(self.link_etx)


def rank_increment(link_etx: float) -> int:
    return int(link_etx * MIN_HOP_RANK_INCREASE)


@dataclass(slots=True)
class RouteEntry:
    next_hop: int
    expires: float
    source_route: tuple[int, ...] = ()


class RplNode:
    def __init__(self, net: Network, node_id: int, is_root: bool = False,
                 mop: Mop = Mop.STORING, defense=None) -> None:
        self.net = net
        self.id = node_id
        self.addr = NodeAddress(node_id)
        self.is_root = is_root
        self.mop = mop
        self.defense = defense
        self.rank = ROOT_RANK if is_root else INFINITE_RANK
        self.candidates: dict[int, Candidate] = {}
        self.preferred: int | None = None
        self.trickle = TrickleState()
        self._trickle_ev = None
        self.routes: dict[GlobalPrefix, RouteEntry] = {}
        self.dao_seq = 0
        self.fwd_seq = 0
        self._dao_timer = None
        self._dao_reason: DaoReason | None = None
        self._pending_dao: Dao | None = None
        self._pending_retries = 0
        self._ack_timer = None
        self._dis_ev = None
        self._max_parent_rank = INFINITE_RANK
        self.attacker = None  # set by adversary.arm
        self.is_client = not is_root
        self.data_seq = 0
        self.counters: dict[str, int] = {}

    # -- helpers -------------------------------------------------------------
    @property
    def joined(self) -> bool:
        return self.is_root or self.preferred is not None

    def _rng(self, concern: str):
        # per-node streams keep one node's timers independent of other nodes' traffic
        return self.net.rng(f"{concern}:{self.id}")

    def _count(self, key: str, n: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + n

    def _unicast(self, dst: int, msg):
        if msg.cls is MsgClass.DAO or msg.cls is MsgClass.DATA:
            msg.sender_rank = self.rank
        out = self.net.medium.try_deliver(self.id, dst, msg, self.net.sim.now)
        if dst == self.preferred or dst in self.candidates:
            self._link_feedback(dst, out)
        return out

    # -- lifecycle -----------------------------------------------------------
    def start(self) -> None:
        if self.is_root:
            self._trickle_begin()
        else:
            self._schedule_dis(DIS_START_DELAY_S * (1.0 + self._rng("jitter").random()))

    # -- trickle -------------------------------------------------------------
    def _trickle_begin(self) -> None:
        sim = self.net.sim
        sim.cancel(self._trickle_ev)
        self.trickle.reset()
        fire = self.trickle.start_interval(sim.now, self._rng("trickle"))
        self._trickle_ev = sim.schedule(fire, EventKind.TRICKLE_FIRE, self.trickle_fire)

    def trickle_reset(self) -> None:
        """Inconsistency: restart at the minimum interval unless already there."""
        if not self.joined:
            return
        if self._trickle_ev is None or self.trickle.current_interval > self.trickle.i_min:
            self._trickle_begin()

    def trickle_fire(self) -> None:
        sim = self.net.sim
        if not self.joined:
            self._trickle_ev = None
            return
        if self.trickle.should_transmit():
            self.send_dio()
        else:
            self._count("dio_suppressed")
        next_start = self.trickle.interval_end()
        self.trickle.double()
        fire = self.trickle.start_interval(next_start, self._rng("trickle"))
        self._trickle_ev = sim.schedule(fire, EventKind.TRICKLE_FIRE, self.trickle_fire)

    def send_dio(self, rank: int | None = None) -> None:
        self.net.medium.broadcast(self.id, Dio(self.rank if rank is None else rank), self.net.sim.now)
        self._count("dio_sent")
        if self.defense is not None:
            self.defense.on_dio_sent(self.net.sim.now)

    # -- DIS -----------------------------------------------------------------
    def _schedule_dis(self, delay: float) -> None:
        self.net.sim.cancel(self._dis_ev)
        self._dis_ev = self.net.sim.schedule_in(delay, EventKind.DIS_TIMER, self._dis_fire)

    def _dis_fire(self) -> None:
        self._dis_ev = None
        if self.joined:
            return
        self.net.medium.broadcast(self.id, Dis(), self.net.sim.now)
        self._count("dis_sent")
        self._schedule_dis(DIS_INTERVAL_S)

    def on_dis(self, src: int, msg: Dis) -> None:
        self._count("dis_recv")
        if self.joined:
            self.trickle_reset()

    # -- frame dispatch ------------------------------------------------------
    def on_frame(self, src: int, msg) -> None:
        cls = msg.cls
        if cls is MsgClass.DATA:
            self.on_data(src, msg)
        elif cls is MsgClass.DAO:
            self.on_dao(src, msg)
        elif cls is MsgClass.DIO:
            self.on_receive_dio(src, msg)
        elif cls is MsgClass.DAO_ACK:
            self.on_dao_ack(src, msg)
        elif cls is MsgClass.DIS:
            self.on_dis(src, msg)

    # -- DIO / parent selection ---------------------------------------------
    def on_receive_dio(self, src: int, dio: Dio) -> None:
        self._count("dio_recv")
        if self.is_root:
            return
        if dio.rank >= INFINITE_RANK:
            if self.candidates.pop(src, None) is not None and src == self.preferred:
                self._lose_parent(DaoReason.ROUTE_ERROR)
            return
        old_parent_rank = self.candidates[src].rank if src in self.candidates else None
        now = self.net.sim.now
        cand = self.candidates.get(src)
        if cand is None:
            self.candidates[src] = Candidate(dio.rank, heard_at=now)
        else:
            cand.rank = dio.rank
            cand.heard_at = now

        old_rank = self.rank
        changed = self.select_parent()
        if changed:
            self._schedule_dao(DaoReason.PARENT_CHANGE)
        elif src == self.preferred:
            self._schedule_dao(DaoReason.DIO_REFRESH)

        inconsistent = changed or self.rank != old_rank or (
            src == self.preferred and old_parent_rank is not None and old_parent_rank != dio.rank)
        if inconsistent:
            self.trickle_reset()
        elif self.trickle.interval_start <= self.net.sim.now:
            self.trickle.counter += 1

    def _eligible(self, nid: int, cand: Candidate) -> bool:
        if self.preferred is None:
            return cand.rank < self._max_parent_rank
        return cand.rank < self.rank or nid == self.preferred

    def select_parent(self) -> bool:
        """Pick the candidate with the lowest path cost, with hysteresis.

        Returns True if the preferred parent changed. Updates ``self.rank``.
        """
        best_id = None
        best_cost = None
        for nid in sorted(self.candidates):
            cand = self.candidates[nid]
            if not self._eligible(nid, cand):
                continue
            cost = cand.path_cost()
            if best_cost is None or cost < best_cost:
                best_id, best_cost = nid, cost
        old = self.preferred
        if best_id is None:
            return False
        if old is not None and best_id != old and old in self.candidates:
            cur_cost = self.candidates[old].path_cost()
            if cur_cost - best_cost < PARENT_SWITCH_THRESHOLD:
                best_id, best_cost = old, cur_cost
        self.preferred = best_id
        self.rank = min(best_cost, INFINITE_RANK)
        if best_id != old:
            self._count("parent_changes")
            if old is None:
                self.net.sim.cancel(self._dis_ev)
                self._dis_ev = None
                self.net.on_join(self)
            return True
        return False

    def _lose_parent(self, reason: DaoReason) -> None:
        """Preferred parent is gone: try another candidate, else detach."""
        self.preferred = None
        old_rank = self.rank
        self.rank = INFINITE_RANK
        horizon = self.net.sim.now - CANDIDATE_FRESH_S
        for nid in [n for n, c in self.candidates.items() if c.heard_at < horizon]:
            del self.candidates[nid]
        # anything ranked at or below our old children could be in our own sub-DODAG
        self._max_parent_rank = min(old_rank + MIN_HOP_RANK_INCREASE, INFINITE_RANK)
        chosen = self.select_parent()
        self._max_parent_rank = INFINITE_RANK
        if chosen:
            self._schedule_dao(reason)
            self.trickle_reset()
            return
        self._count("detach")
        if old_rank < INFINITE_RANK:
            self.send_dio(INFINITE_RANK)
        self.net.sim.cancel(self._trickle_ev)
        self._trickle_ev = None
        self._schedule_dis(self._rng("jitter").uniform(0.0, 1.0))

    def _link_feedback(self, dst: int, outcome) -> None:
        if isinstance(outcome, Dropped):
            if outcome.reason is DropReason.OUT_OF_RANGE:
                self.candidates.pop(dst, None)
                if dst == self.preferred:
                    self._lose_parent(DaoReason.ROUTE_ERROR)
                return
            if outcome.reason is not DropReason.RX_FAILURE:
                return
            success = 0.0
        else:
            success = 1.0
            cand = self.candidates.get(dst)
            if cand is not None:
                cand.heard_at = self.net.sim.now
        if self.net.radio.rx_success >= 1.0:
            return
        cand = self.candidates.get(dst)
        if cand is None:
            return
        cand.delivery_ratio += ETX_ALPHA * (success - cand.delivery_ratio)
        cand.link_etx = min(1.0 / max(cand.delivery_ratio, 1e-9), MAX_LINK_ETX)

    # -- DAO origination ------------------------------------------------------
    def _schedule_dao(self, reason: DaoReason) -> None:
        if self.mop is Mop.NO_DOWNWARD or self.is_root:
            return
        if self._dao_timer is not None:
            if _REASON_PRIORITY[reason] > _REASON_PRIORITY[self._dao_reason]:
                self._dao_reason = reason
            return
        self._dao_reason = reason
        delay = DAO_LATENCY_S * (0.5 + self._rng("jitter").random())
        self._dao_timer = self.net.sim.schedule_in(delay, EventKind.DAO_TIMER, self._dao_timer_fire)

    def _dao_timer_fire(self) -> None:
        self._dao_timer = None
        reason = self._dao_reason or DaoReason.DIO_REFRESH
        self._dao_reason = None
        self.send_dao(reason)

    def send_dao(self, reason: DaoReason = DaoReason.DIO_REFRESH) -> Dao | None:
        if self.mop is Mop.NO_DOWNWARD or self.preferred is None or self.is_root:
            return None
        self.dao_seq = (self.dao_seq + 1) & 0xFF
        dao = Dao(self.addr.global_prefix, self.dao_seq)
        self._count("dao_sent")
        self._count(f"dao_sent_{reason.value}")
        if self.attacker is not None:
            self.attacker.capture(dao)
        self.net.sim.cancel(self._ack_timer)
        self._pending_dao = dao
        self._pending_retries = 0
        self._transmit_dao(dao)
        return dao

    def _transmit_dao(self, dao: Dao) -> None:
        self._unicast(self.preferred, dao.copy())
        self._ack_timer = self.net.sim.schedule_in(
            DAO_ACK_TIMEOUT_S, EventKind.DAO_TIMER, self._ack_timeout)

    def _ack_timeout(self) -> None:
        self._ack_timer = None
        dao = self._pending_dao
        if dao is None:
            return
        if self._pending_retries >= DAO_MAX_RETRIES or self.preferred is None:
            self._pending_dao = None
            self._count("dao_giveup")
            return
        self._pending_retries += 1
        self._count("dao_sent")
        self._count("dao_retransmit")
        self._transmit_dao(dao)

    def on_dao_ack(self, src: int, ack: DaoAck) -> None:
        self._count("daoack_recv")
        if ack.source_route:
            nxt, rest = ack.source_route[0], ack.source_route[1:]
            self._unicast(nxt, DaoAck(ack.acked_sequence, ack.target, list(rest)))
            self._count("daoack_fwd")
            return
        pending = self._pending_dao
        if pending is not None and ack.target == self.addr.global_prefix \
                and ack.acked_sequence == pending.sequence:
            self._pending_dao = None
            self.net.sim.cancel(self._ack_timer)
            self._ack_timer = None

    # -- DAO reception -------------------------------------------------------
    def _loop_detected(self, msg) -> bool:
        """Upward traffic must reach a strictly lower rank.

        The first inconsistency only marks the packet (ranks may simply be
        stale); a second one on the same packet means a loop, and it is
        dropped. Either way DIOs are sped up to repair the ranks.
        """
        if self.is_root or self.rank < msg.sender_rank:
            return False
        self._count("rank_error")
        self.trickle_reset()
        if msg.rank_error:
            return True
        msg.rank_error = True
        return False

    def on_dao(self, src: int, dao: Dao) -> None:
        self._count("dao_recv")
        if self.mop is Mop.NO_DOWNWARD:
            return
        if self.is_root:
            self.root_process_dao(src, dao)
        elif self.mop.storing:
            self.process_dao_storing(src, dao)
        else:
            self.process_dao_nonstoring(src, dao)

    def _admit(self, src: int, dao: Dao) -> bool:
        if self.defense is None:
            return True
        verdict = self.defense.on_dao(NodeAddress(src), dao.dao_prefix, self.net.sim.now)
        self.net.on_verdict(self, src, verdict)
        if verdict.accepted:
            return True
        self._count("dao_discarded")
        return False

    def _install_route(self, prefix: GlobalPrefix, next_hop: int,
                       source_route: tuple[int, ...] = ()) -> None:
        now = self.net.sim.now
        entry = self.routes.get(prefix)
        if entry is not None and entry.next_hop == next_hop:
            entry.expires = now + DAO_ROUTE_LIFETIME_S
            entry.source_route = source_route
            return
        if entry is None and len(self.routes) >= ROUTE_TABLE_SIZE:
            self._expire_routes()
            if len(self.routes) >= ROUTE_TABLE_SIZE:
                oldest = min(self.routes, key=lambda p: self.routes[p].expires)
                del self.routes[oldest]
                self._count("route_evictions")
        self.routes[prefix] = RouteEntry(next_hop, now + DAO_ROUTE_LIFETIME_S, source_route)

    def _expire_routes(self) -> None:
        now = self.net.sim.now
        for p in [p for p, e in self.routes.items() if e.expires <= now]:
            del self.routes[p]

    def _send_ack(self, dst: int, dao: Dao, source_route: list[int] | None = None) -> None:
        self._unicast(dst, DaoAck(dao.sequence, dao.dao_prefix, source_route or []))
        self._count("daoack_sent")

    def process_dao_storing(self, src: int, dao: Dao) -> None:
        if not self._admit(src, dao):
            return
        if self._loop_detected(dao):
            self._count("dao_loop_drop")
            return
        self._install_route(dao.dao_prefix, src)
        self._send_ack(src, dao)
        if self.preferred is None:
            return
        # aggregated DAO: new message from this node, same target prefix
        self.fwd_seq = (self.fwd_seq + 1) & 0xFF
        up = Dao(dao.dao_prefix, self.fwd_seq)
        up.rank_error = dao.rank_error
        self._unicast(self.preferred, up)
        self._count("dao_fwd")
        self.net.on_dao_forwarded(self, dao)

    def process_dao_nonstoring(self, src: int, dao: Dao) -> None:
        if not self._admit(src, dao):
            return
        if self.addr in dao.reverse_route_stack or self._loop_detected(dao):
            self._count("dao_loop_drop")
            return
        if self.preferred is None:
            return
        fwd = dao.copy()
        fwd.reverse_route_stack.append(self.addr)
        self._unicast(self.preferred, fwd)
        self._count("dao_fwd")
        self.net.on_dao_forwarded(self, dao)

    def root_process_dao(self, src: int, dao: Dao) -> None:
        if not self._admit(src, dao):
            return
        self.net.on_root_dao(self, src, dao)
        if self.mop.storing:
            self._install_route(dao.dao_prefix, src)
            self._send_ack(src, dao)
            return
        target = NodeAddress.from_global(dao.dao_prefix).node_id
        hops = [a.node_id for a in reversed(dao.reverse_route_stack)] + [target]
        self._install_route(dao.dao_prefix, hops[0], tuple(hops))
        self._send_ack(hops[0], dao, hops[1:])

    # -- data plane ----------------------------------------------------------
    def generate_data(self) -> None:
        net = self.net
        pkt = DataPacket(self.id, self.data_seq, net.sim.now, net.data_size)
        self.data_seq += 1
        net.on_data_sent(self, pkt)
        self.net.medium.energy.cpu_us[self.id] += CPU_PER_MESSAGE_US
        self._forward_data(pkt)

    def _forward_data(self, pkt: DataPacket) -> None:
        if self.preferred is None:
            self._count("data_no_route")
            return
        if pkt.hops >= DATA_HOP_LIMIT:
            self._count("data_hop_limit")
            return
        pkt.hops += 1
        # a parent found out of reach is dropped from the parent set and the
        # packet goes to the next best parent, until one is in reach or none is left
        while True:
            out = self._unicast(self.preferred, pkt)
            if not (isinstance(out, Dropped) and out.reason is DropReason.OUT_OF_RANGE):
                return
            if self.preferred is None:
                self._count("data_no_route")
                return
            self._count("data_failover")

    def on_data(self, src: int, pkt: DataPacket) -> None:
        if self.is_root:
            self.net.on_data_received(self, pkt)
            return
        if self._loop_detected(pkt):
            self._count("data_loop_drop")
            return
        self._count("data_fwd")
        fwd = DataPacket(pkt.origin, pkt.seqno, pkt.created_at, pkt.payload_bytes, pkt.hops)
        fwd.rank_error = pkt.rank_error
        self._forward_data(fwd)
