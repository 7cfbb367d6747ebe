"""Unit-disk radio medium with a simple CSMA-less MAC.

A frame can be decoded within ``tx_range`` of its sender but occupies the
air at every node within ``interference_range``. When two frames overlap in
time at the same node, the one that started later is lost there. A node's
own transmissions count too, so a radio that is sending cannot receive.
"""

from __future__ import annotations

import logging
import math
import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from .engine import EventKind, Simulator
from .messages import MsgClass

log = logging.getLogger(__name__)

BITRATE_BPS = 250_000.0
MAX_BACKOFF_S = 0.008
TURNAROUND_S = 0.002
CPU_PER_MESSAGE_S = 0.001
# energy is booked in whole microseconds: one byte takes exactly 32 us at 250 kbit/s
US_PER_S = 1_000_000
US_PER_BYTE = 32
CPU_PER_MESSAGE_US = 1000
# air-log entries older than this can no longer overlap a pending frame
_AIR_HORIZON_S = 0.05


@dataclass(frozen=True)
class RadioModel:
    tx_range: float = 50.0
    interference_range: float = 100.0
    rx_success: float = 1.0
    queue_capacity: int = 8

    def __post_init__(self) -> None:
        if not 0 < self.tx_range <= self.interference_range:
            raise ValueError("need 0 < tx_range <= interference_range")
        if not 0.0 <= self.rx_success <= 1.0:
            raise ValueError("rx_success must be within [0, 1]")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")


class DropReason(str, Enum):
    OUT_OF_RANGE = "OutOfRange"
    RX_FAILURE = "RxFailure"
    COLLISION = "Collision"
    QUEUE_FULL = "QueueFull"
    END_OF_RUN = "EndOfRun"


@dataclass(frozen=True, slots=True)
class Delivered:
    at: float


@dataclass(frozen=True, slots=True)
class Dropped:
    reason: DropReason


DeliveryOutcome = Delivered | Dropped


def airtime(nbytes: int) -> float:
    return nbytes * 8.0 / BITRATE_BPS


def airtime_us(nbytes: int) -> int:
    return nbytes * US_PER_BYTE


class EnergyBook:
    """Microseconds spent per radio/CPU state, per node. Low-power time is the remainder.

    Integer bookkeeping keeps the four states an exact partition of the run.
    """

    def __init__(self, node_ids: Iterable[int]) -> None:
        ids = list(node_ids)
        self.tx_us = dict.fromkeys(ids, 0)
        self.rx_us = dict.fromkeys(ids, 0)
        self.cpu_us = dict.fromkeys(ids, 0)

    def lpm_us(self, node: int, duration_us: int) -> int:
        return duration_us - self.tx_us[node] - self.rx_us[node] - self.cpu_us[node]


class Tally:
    """sent / delivered / dropped per (src, dst, message class)."""

    def __init__(self) -> None:
        self.counts: dict[tuple[int, int, str], list[int]] = {}
        self.drop_reasons: dict[str, int] = {}

    def _row(self, src: int, dst: int, cls: str) -> list[int]:
        key = (src, dst, cls)
        row = self.counts.get(key)
        if row is None:
            row = self.counts[key] = [0, 0, 0]
        return row

    def sent(self, src: int, dst: int, cls: str) -> None:
        self._row(src, dst, cls)[0] += 1

    def delivered(self, src: int, dst: int, cls: str) -> None:
        self._row(src, dst, cls)[1] += 1

    def dropped(self, src: int, dst: int, cls: str, reason: DropReason) -> None:
        self._row(src, dst, cls)[2] += 1
        self.drop_reasons[reason.value] = self.drop_reasons.get(reason.value, 0) + 1

    def by_class(self) -> dict[str, tuple[int, int, int]]:
        out: dict[str, list[int]] = {}
        for (_, _, cls), (s, d, x) in self.counts.items():
            acc = out.setdefault(cls, [0, 0, 0])
            acc[0] += s
            acc[1] += d
            acc[2] += x
        return {k: tuple(v) for k, v in out.items()}


class _Frame:
    __slots__ = ("fid", "src", "msg", "cls", "start", "end", "receivers")

    def __init__(self, fid, src, msg, cls, start, end, receivers):
        self.fid = fid
        self.src = src
        self.msg = msg
        self.cls = cls
        self.start = start
        self.end = end
        self.receivers = receivers


class Medium:
    """Moves frames between nodes and charges their airtime.

    ``positions`` maps node id to a mutable ``[x, y]`` pair; mobility updates
    them in place and must call :meth:`positions_changed` afterwards.
    ``on_receive(dst, src, msg)`` is called for every frame that survives.
    ``mac_rng`` is either one shared stream for backoff draws or a factory
    ``(sender, message class) -> stream``.
    """

    def __init__(
        self,
        sim: Simulator,
        radio: RadioModel,
        positions: dict[int, list[float]],
        rng: random.Random,
        mac_rng: random.Random | Callable[[int, str], random.Random],
        energy: EnergyBook,
        on_receive: Callable[[int, int, object], None],
        tally: Tally | None = None,
        trace: Callable[[str], None] | None = None,
    ) -> None:
        self.sim = sim
        self.radio = radio
        self.positions = positions
        self.rng = rng
        self._mac_rng = mac_rng
        self.energy = energy
        self.on_receive = on_receive
        self.tally = tally if tally is not None else Tally()
        self.trace = trace
        self.alive: set[int] = set(positions)
        self._busy_until = dict.fromkeys(positions, 0.0)
        self._pending: dict[int, deque] = {n: deque() for n in positions}
        self._air: dict[int, list[tuple[float, float, int]]] = {n: [] for n in positions}
        self._neighbors: dict[int, list[int]] | None = None
        self._interferers: dict[int, list[int]] | None = None
        self._fid = 0

    # -- geometry ---------------------------------------------------------
    def distance(self, a: int, b: int) -> float:
        pa, pb = self.positions[a], self.positions[b]
        return math.hypot(pa[0] - pb[0], pa[1] - pb[1])

    def positions_changed(self) -> None:
        self._neighbors = None
        self._interferers = None

    def _within(self, r: float) -> dict[int, list[int]]:
        ids = sorted(self.positions)
        table: dict[int, list[int]] = {n: [] for n in ids}
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                if self.distance(a, b) <= r:
                    table[a].append(b)
                    table[b].append(a)
        return table

    def neighbors(self, node: int) -> list[int]:
        """Nodes within ``tx_range`` of ``node``, in id order."""
        if self._neighbors is None:
            self._neighbors = self._within(self.radio.tx_range)
        return self._neighbors[node]

    def interferers(self, node: int) -> list[int]:
        """Nodes within ``interference_range`` of ``node``, in id order."""
        if self._interferers is None:
            self._interferers = self._within(self.radio.interference_range)
        return self._interferers[node]

    # -- MAC ----------------------------------------------------------------
    def _check_node(self, node: int) -> None:
        if node not in self.alive:
            raise KeyError(f"unknown or dead node {node}")

    def _emit(self, line: str) -> None:
        if self.trace is not None:
            self.trace(f"{self.sim.now:.6f} {line}")

    def _backoff_rng(self, src: int, cls: str) -> random.Random:
        if isinstance(self._mac_rng, random.Random):
            return self._mac_rng
        return self._mac_rng(src, cls)

    def _reserve(self, src: int, nbytes: int, cls: str) -> tuple[float, float] | None:
        """Queue a frame at ``src``; returns its (start, end) or None when full."""
        now = self.sim.now
        pending = self._pending[src]
        while pending and pending[0] <= now:
            pending.popleft()
        if len(pending) >= self.radio.queue_capacity:
            return None
        start = max(now, self._busy_until[src])
        start += self._backoff_rng(src, cls).uniform(0.0, MAX_BACKOFF_S) + TURNAROUND_S
        end = start + airtime(nbytes)
        self._busy_until[src] = end
        pending.append(end)
        return start, end

    def _occupy_air(self, src: int, start: float, end: float, fid: int) -> None:
        horizon = self.sim.now - _AIR_HORIZON_S
        for n in (src, *self.interferers(src)):
            log_n = self._air[n]
            if log_n and log_n[0][1] < horizon:
                log_n[:] = [e for e in log_n if e[1] >= horizon]
            log_n.append((start, end, fid))

    def _collided(self, node: int, start: float, fid: int) -> bool:
        for s, e, f in self._air[node]:
            if f != fid and e > start and (s < start or (s == start and f < fid)):
                return True
        return False

    def try_deliver(self, src: int, dst: int, msg, now: float | None = None) -> DeliveryOutcome:
        """Unicast ``msg`` from ``src`` to ``dst``."""
        self._check_node(src)
        self._check_node(dst)
        cls = msg.cls.value
        self.tally.sent(src, dst, cls)
        if self.distance(src, dst) > self.radio.tx_range:
            return self._drop_now(src, dst, cls, DropReason.OUT_OF_RANGE)
        slot = self._reserve(src, msg.size(), cls)
        if slot is None:
            return self._drop_now(src, dst, cls, DropReason.QUEUE_FULL)
        start, end = slot
        fid = self._fid = self._fid + 1
        dur = airtime_us(msg.size())
        self.energy.tx_us[src] += dur
        self._occupy_air(src, start, end, fid)
        self.energy.rx_us[dst] += dur
        if self.radio.rx_success < 1.0 and self.rng.random() >= self.radio.rx_success:
            return self._drop_now(src, dst, cls, DropReason.RX_FAILURE)
        frame = _Frame(fid, src, msg, cls, start, end, (dst,))
        self.sim.schedule(end, EventKind.MESSAGE_DELIVERY, self._deliver, frame)
        self._emit(f"TX {src} {dst} {cls} scheduled")
        return Delivered(end)

    def broadcast(self, src: int, msg, now: float | None = None) -> list[DeliveryOutcome]:
        """Send one frame heard by every node within range of ``src``."""
        self._check_node(src)
        cls = msg.cls.value
        receivers = [n for n in self.neighbors(src) if n in self.alive]
        if not receivers:
            return []
        for dst in receivers:
            self.tally.sent(src, dst, cls)
        slot = self._reserve(src, msg.size(), cls)
        if slot is None:
            return [self._drop_now(src, dst, cls, DropReason.QUEUE_FULL) for dst in receivers]
        start, end = slot
        fid = self._fid = self._fid + 1
        dur = airtime_us(msg.size())
        self.energy.tx_us[src] += dur
        self._occupy_air(src, start, end, fid)
        outcomes: list[DeliveryOutcome] = []
        ok: list[int] = []
        lossy = self.radio.rx_success < 1.0
        for dst in receivers:
            self.energy.rx_us[dst] += dur
            if lossy and self.rng.random() >= self.radio.rx_success:
                outcomes.append(self._drop_now(src, dst, cls, DropReason.RX_FAILURE))
            else:
                ok.append(dst)
                outcomes.append(Delivered(end))
        if ok:
            frame = _Frame(fid, src, msg, cls, start, end, tuple(ok))
            self.sim.schedule(end, EventKind.MESSAGE_DELIVERY, self._deliver, frame)
        self._emit(f"TX {src} * {cls} scheduled")
        return outcomes

    def _drop_now(self, src: int, dst: int, cls: str, reason: DropReason) -> Dropped:
        self.tally.dropped(src, dst, cls, reason)
        self._emit(f"DROP {src} {dst} {cls} {reason.value}")
        return Dropped(reason)

    def _deliver(self, frame: _Frame) -> None:
        for dst in frame.receivers:
            if dst not in self.alive or self._collided(dst, frame.start, frame.fid):
                self.tally.dropped(frame.src, dst, frame.cls, DropReason.COLLISION)
                self._emit(f"DROP {frame.src} {dst} {frame.cls} {DropReason.COLLISION.value}")
                continue
            self.tally.delivered(frame.src, dst, frame.cls)
            self.energy.cpu_us[dst] += CPU_PER_MESSAGE_US
            self._emit(f"RX {frame.src} {dst} {frame.cls} delivered")
            self.on_receive(dst, frame.src, frame.msg)

    def finalize(self) -> None:
        """Count frames still in the air at the end of the run as dropped."""
        for ev in self.sim.pending():
            if ev.cancelled or ev.kind is not EventKind.MESSAGE_DELIVERY:
                continue
            frame = ev.args[0]
            for dst in frame.receivers:
                self.tally.dropped(frame.src, dst, frame.cls, DropReason.END_OF_RUN)
            ev.cancelled = True


__all__ = [
    "RadioModel", "Medium", "DropReason", "Delivered", "Dropped", "DeliveryOutcome",
    "EnergyBook", "Tally", "airtime", "airtime_us", "MsgClass",
]
