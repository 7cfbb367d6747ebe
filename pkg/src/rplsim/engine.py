"""Deterministic discrete-event engine: clock, event queue, seeded streams."""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable


class EventKind(IntEnum):
    MESSAGE_DELIVERY = 0
    TRICKLE_FIRE = 1
    DAO_TIMER = 2
    DATA_GENERATION = 3
    MOBILITY_STEP = 4
    DEFENSE_REINIT = 5
    ATTACK_REPLAY = 6
    METRICS_SAMPLE = 7
    DIS_TIMER = 8


class CausalityError(RuntimeError):
    """An event was scheduled in the past; the run cannot continue."""


@dataclass(order=True, slots=True)
class Event:
    fire_at: float
    seq: int
    kind: EventKind = field(compare=False)
    handler: Callable[..., Any] = field(compare=False, repr=False)
    args: tuple = field(compare=False, default=(), repr=False)
    cancelled: bool = field(compare=False, default=False)


class RngStreams:
    """Independent named random streams derived from one 64-bit seed.

    Each concern (radio, mobility, jitter, ...) draws from its own
    ``random.Random`` so that extra draws in one concern never shift the
    sequence seen by another.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._streams: dict[str, random.Random] = {}

    def stream(self, name: str) -> random.Random:
        rng = self._streams.get(name)
        if rng is None:
            digest = hashlib.sha256(f"{self.seed}:{name}".encode()).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            self._streams[name] = rng
        return rng


class Simulator:
    """Single-threaded event loop ordered by ``(fire_at, seq)``."""

    def __init__(self) -> None:
        self.now = 0.0
        self._queue: list[Event] = []
        self._seq = 0
        self.processed = 0

    def schedule(
        self, fire_at: float, kind: EventKind, handler: Callable[..., Any], *args: Any
    ) -> Event:
        if fire_at < self.now:
            raise CausalityError(
                f"{kind.name} scheduled at {fire_at!r} but clock is at {self.now!r}"
            )
        ev = Event(fire_at, self._seq, kind, handler, args)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(
        self, delay: float, kind: EventKind, handler: Callable[..., Any], *args: Any
    ) -> Event:
        return self.schedule(self.now + delay, kind, handler, *args)

    @staticmethod
    def cancel(ev: Event | None) -> None:
        if ev is not None:
            ev.cancelled = True

    def __len__(self) -> int:
        return len(self._queue)

    def pending(self) -> list[Event]:
        """Live (not cancelled) events still queued, in firing order."""
        return sorted(ev for ev in self._queue if not ev.cancelled)

    def run_until(self, t_end: float) -> int:
        """Process events with ``fire_at < t_end``; the window is half-open.

        The clock is left at ``t_end`` afterwards so that time-based
        accounting covers the full run. Returns the number of events handled.
        """
        queue = self._queue
        pop = heapq.heappop
        handled = 0
        while queue and queue[0].fire_at < t_end:
            ev = pop(queue)
            if ev.cancelled:
                continue
            if ev.fire_at < self.now:
                raise CausalityError(f"event {ev.kind.name} at {ev.fire_at!r} < {self.now!r}")
            self.now = ev.fire_at
            ev.handler(*ev.args)
            handled += 1
        self.now = max(self.now, t_end)
        self.processed += handled
        return handled
