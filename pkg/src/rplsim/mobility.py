"""Random waypoint mobility inside a square arena."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass


@dataclass
class MobilityState:
    waypoint: tuple[float, float]
    speed: float
    paused_until: float = 0.0


class RandomWaypoint:
    def __init__(
        self,
        rng: random.Random,
        arena: float = 150.0,
        speed_min: float = 1.0,
        speed_max: float = 2.0,
        pause: float = 0.0,
    ) -> None:
        if not 0 < speed_min <= speed_max:
            raise ValueError("need 0 < speed_min <= speed_max")
        self.rng = rng
        self.arena = arena
        self.speed_min = speed_min
        self.speed_max = speed_max
        self.pause = pause
        self.states: dict[int, MobilityState] = {}

    def _draw(self, now: float) -> MobilityState:
        wp = (self.rng.uniform(0.0, self.arena), self.rng.uniform(0.0, self.arena))
        return MobilityState(wp, self.rng.uniform(self.speed_min, self.speed_max), now + self.pause)

    def add(self, node: int, now: float = 0.0) -> MobilityState:
        state = self.states[node] = self._draw(now - self.pause)
        return state

    def step(self, node: int, pos: list[float], dt: float, now: float = 0.0) -> list[float]:
        """Advance ``pos`` in place toward the node's waypoint by ``speed * dt``.

        On arrival the node stops at the waypoint and draws the next leg.
        """
        state = self.states[node]
        if now < state.paused_until:
            return pos
        dx = state.waypoint[0] - pos[0]
        dy = state.waypoint[1] - pos[1]
        dist = math.hypot(dx, dy)
        travel = state.speed * dt
        if dist <= travel:
            pos[0], pos[1] = state.waypoint
            self.states[node] = self._draw(now)
        else:
            pos[0] += dx / dist * travel
            pos[1] += dy / dist * travel
        # guard against float drift at the borders
        pos[0] = min(max(pos[0], 0.0), self.arena)
        pos[1] = min(max(pos[1], 0.0), self.arena)
        return pos
