"""DAO insider attacker: a legitimate node that replays its own captured DAO."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .engine import EventKind
from .messages import Dao

if TYPE_CHECKING:
    from .node import RplNode


class AttackConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    replay_interval: float = 1.0
    attack_start: float = 90.0
    attacker_count: int = 4

    def __post_init__(self) -> None:
        if self.replay_interval <= 0:
            raise AttackConfigError("replay_interval must be > 0")
        if self.attack_start < 0:
            raise AttackConfigError("attack_start must be >= 0")
        if self.attacker_count < 0:
            raise AttackConfigError("attacker_count must be >= 0")


def select_attackers(clients: Sequence[int], count: int, rng: random.Random) -> list[int]:
    """Pick ``count`` distinct client ids; same rng state gives the same pick."""
    if count > len(clients):
        raise AttackConfigError(f"{count} attackers requested but only {len(clients)} clients")
    return sorted(rng.sample(sorted(clients), count))


class Attacker:
    """Attack behaviour attached to one node.

    Until ``attack_start`` the node is an ordinary participant. From then on it
    unicasts a verbatim copy of the last DAO it originated (same sequence
    number) to its current preferred parent every ``replay_interval`` seconds.
    """

    def __init__(self, node: RplNode, config: AttackConfig) -> None:
        self.node = node
        self.config = config
        self.captured: Dao | None = None
        self.attempted = 0
        self.sent = 0
        self.skipped = 0
        self.fire_times: list[float] = []

    def capture(self, dao: Dao) -> None:
        self.captured = dao.copy()

    def replay_fire(self) -> None:
        node = self.node
        sim = node.net.sim
        self.attempted += 1
        self.fire_times.append(sim.now)
        sim.schedule_in(self.config.replay_interval, EventKind.ATTACK_REPLAY, self.replay_fire)
        if node.preferred is None or self.captured is None:
            self.skipped += 1
            return
        copy = self.captured.copy()
        copy.replay = True
        node._unicast(node.preferred, copy)
        node._count("attack_replays")
        self.sent += 1


def arm(node: RplNode, config: AttackConfig) -> Attacker:
    if node.is_root:
        raise AttackConfigError("the DODAG root cannot be an attacker")
    sim = node.net.sim
    if sim.now >= config.attack_start:
        raise AttackConfigError("attacker must be armed before attack_start")
    attacker = Attacker(node, config)
    node.attacker = attacker
    sim.schedule(config.attack_start, EventKind.ATTACK_REPLAY, attacker.replay_fire)
    return attacker
