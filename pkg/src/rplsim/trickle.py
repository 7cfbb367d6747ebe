"""Trickle timer state (ContikiRPL defaults)."""

from __future__ import annotations

import random
from dataclasses import dataclass

DIO_INTERVAL_MIN_MS = 4096
DIO_INTERVAL_DOUBLINGS = 8
DIO_REDUNDANCY = 10


@dataclass
class TrickleState:
    i_min: int = DIO_INTERVAL_MIN_MS
    i_max_doublings: int = DIO_INTERVAL_DOUBLINGS
    redundancy_k: int = DIO_REDUNDANCY
    current_interval: int = DIO_INTERVAL_MIN_MS
    counter: int = 0
    interval_start: float = 0.0
    next_fire: float = 0.0

    @property
    def i_max(self) -> int:
        return self.i_min << self.i_max_doublings

    def start_interval(self, now: float, rng: random.Random) -> float:
        """Begin a new interval at ``now``; returns the firing time.

        The firing point is uniform over the second half of the interval.
        """
        self.counter = 0
        self.interval_start = now
        half = self.current_interval / 2000.0
        self.next_fire = now + half + rng.uniform(0.0, half)
        return self.next_fire

    def interval_end(self) -> float:
        return self.interval_start + self.current_interval / 1000.0

    def should_transmit(self) -> bool:
        return self.counter < self.redundancy_k

    def double(self) -> None:
        self.current_interval = min(self.current_interval * 2, self.i_max)

    def reset(self) -> None:
        self.current_interval = self.i_min
