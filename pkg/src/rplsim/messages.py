"""Node identities and the frames exchanged over the medium."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

INFINITE_RANK = 0xFFFF
ROOT_RANK = 256
MIN_HOP_RANK_INCREASE = 256


@dataclass(frozen=True, slots=True)
class GlobalPrefix:
    """Global (routable) address of a node; shares the interface id with link-local."""

    iid: int

    def __str__(self) -> str:
        return f"fd00::{self.iid:x}"


@dataclass(frozen=True, slots=True)
class NodeAddress:
    node_id: int

    @property
    def link_local(self) -> str:
        return f"fe80::{self.node_id:x}"

    @property
    def global_prefix(self) -> GlobalPrefix:
        return GlobalPrefix(self.node_id)

    @classmethod
    def from_global(cls, prefix: GlobalPrefix) -> NodeAddress:
        return cls(prefix.iid)

    def __str__(self) -> str:
        return self.link_local


class MsgClass(str, Enum):
    DIS = "DIS"
    DIO = "DIO"
    DAO = "DAO"
    DAO_ACK = "DAO-ACK"
    DATA = "DATA"


# Frame size in bytes: PHY/MAC/6LoWPAN/ICMPv6 header plus message body.
HEADER_BYTES = 31
BODY_BYTES = {
    MsgClass.DIS: 2,
    MsgClass.DIO: 40,
    MsgClass.DAO: 30,
    MsgClass.DAO_ACK: 4,
}
ADDRESS_BYTES = 16
UDP_HEADER_BYTES = 8


@dataclass(slots=True)
class Dis:
    cls = MsgClass.DIS

    def size(self) -> int:
        return HEADER_BYTES + BODY_BYTES[MsgClass.DIS]


@dataclass(slots=True)
class Dio:
    rank: int
    dodag_version: int = 0
    instance_id: int = 0
    cls = MsgClass.DIO

    def size(self) -> int:
        return HEADER_BYTES + BODY_BYTES[MsgClass.DIO]


@dataclass(slots=True)
class Dao:
    dao_prefix: GlobalPrefix
    sequence: int
    reverse_route_stack: list[NodeAddress] = field(default_factory=list)
    replay: bool = False
    # rank of the transmitting hop, as carried in the RPL packet option
    sender_rank: int = INFINITE_RANK
    rank_error: bool = False
    cls = MsgClass.DAO

    def size(self) -> int:
        return (HEADER_BYTES + BODY_BYTES[MsgClass.DAO]
                + ADDRESS_BYTES * len(self.reverse_route_stack))

    def copy(self) -> Dao:
        return Dao(self.dao_prefix, self.sequence, list(self.reverse_route_stack), self.replay,
                   self.sender_rank, self.rank_error)


@dataclass(slots=True)
class DaoAck:
    acked_sequence: int
    target: GlobalPrefix
    # non-storing source route, next hop first
    source_route: list[int] = field(default_factory=list)
    cls = MsgClass.DAO_ACK

    def size(self) -> int:
        return (HEADER_BYTES + BODY_BYTES[MsgClass.DAO_ACK]
                + ADDRESS_BYTES * len(self.source_route))


@dataclass(slots=True)
class DataPacket:
    origin: int
    seqno: int
    created_at: float
    payload_bytes: int = 30
    hops: int = 0
    sender_rank: int = INFINITE_RANK
    rank_error: bool = False
    cls = MsgClass.DATA

    def size(self) -> int:
        return HEADER_BYTES + UDP_HEADER_BYTES + self.payload_bytes
