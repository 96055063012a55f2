"""The seven-kind game event vocabulary shared by server, clients, and logs.

Wire form is one JSON object per event, ``{"kind": ..., ...}``, carried in a
``{"sessionId", "seq", "event"}`` envelope. Coordinates on the wire are build
frame; world-frame conversion happens only at dataset boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

from . import world
from .world import Coord, WorldState

ARCHITECT = "architect"
BUILDER = "builder"
ROLES = (ARCHITECT, BUILDER)

AVATAR_MAX_Y = 10.0  # highest legal feet height: 9-block column plus jump


class ProtocolError(Exception):
    """Malformed wire payload."""


@dataclass(frozen=True)
class PlayerJoined:
    role: str


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str


@dataclass(frozen=True)
class PlayerMove:
    pos: tuple[float, float, float]
    pitch: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "pos", tuple(float(v) for v in self.pos))


@dataclass(frozen=True)
class BlockPlaced:
    coord: Coord
    block_id: int

    def __post_init__(self):
        object.__setattr__(self, "coord", Coord(*self.coord))


@dataclass(frozen=True)
class BlockRemoved:
    coord: Coord

    def __post_init__(self):
        object.__setattr__(self, "coord", Coord(*self.coord))


@dataclass(frozen=True)
class TurnEnded:
    role: str


@dataclass(frozen=True)
class GameEnded:
    success: bool
    reporter: str


GameEvent = Union[
    PlayerJoined, ChatMessage, PlayerMove, BlockPlaced, BlockRemoved, TurnEnded, GameEnded
]

BUILDER_ACTION_KINDS = (PlayerMove, BlockPlaced, BlockRemoved)


def to_wire(event: GameEvent) -> dict:
    if isinstance(event, PlayerJoined):
        return {"kind": "PlayerJoined", "role": event.role}
    if isinstance(event, ChatMessage):
        return {"kind": "ChatMessage", "role": event.role, "text": event.text}
    if isinstance(event, PlayerMove):
        return {
            "kind": "PlayerMove",
            "pos": list(event.pos),
            "pitch": event.pitch,
            "yaw": event.yaw,
        }
    if isinstance(event, BlockPlaced):
        return {"kind": "BlockPlaced", "coord": list(event.coord), "blockId": event.block_id}
    if isinstance(event, BlockRemoved):
        return {"kind": "BlockRemoved", "coord": list(event.coord)}
    if isinstance(event, TurnEnded):
        return {"kind": "TurnEnded", "role": event.role}
    if isinstance(event, GameEnded):
        return {"kind": "GameEnded", "success": event.success, "reporter": event.reporter}
    raise TypeError(f"unknown event {event!r}")


def from_wire(payload: dict) -> GameEvent:
    if not isinstance(payload, dict):
        raise ProtocolError("event must be an object")
    kind = payload.get("kind")
    try:
        if kind == "PlayerJoined":
            return PlayerJoined(role=_role(payload["role"]))
        if kind == "ChatMessage":
            return ChatMessage(role=_role(payload["role"]), text=str(payload["text"]))
        if kind == "PlayerMove":
            x, y, z = payload["pos"]
            return PlayerMove(
                pos=(x, y, z),
                pitch=float(payload.get("pitch", 0.0)),
                yaw=float(payload.get("yaw", 0.0)),
            )
        if kind == "BlockPlaced":
            x, y, z = payload["coord"]
            return BlockPlaced(coord=Coord(int(x), int(y), int(z)),
                               block_id=int(payload["blockId"]))
        if kind == "BlockRemoved":
            x, y, z = payload["coord"]
            return BlockRemoved(coord=Coord(int(x), int(y), int(z)))
        if kind == "TurnEnded":
            return TurnEnded(role=_role(payload["role"]))
        if kind == "GameEnded":
            return GameEnded(success=bool(payload["success"]),
                             reporter=_role(payload["reporter"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ProtocolError(f"bad {kind} event: {e}") from None
    raise ProtocolError(f"unknown event kind {kind!r}")


def _role(value) -> str:
    if value not in ROLES:
        raise ProtocolError(f"unknown role {value!r}")
    return value


def apply_event(state: WorldState, event: GameEvent) -> WorldState:
    """Advance a world state by one event; identical on server and clients,
    so replaying a session log reproduces the session's final world exactly.

    Raises world.RuleViolation for moves/edits the world rules forbid.
    """
    if isinstance(event, PlayerMove):
        x, y, z = event.pos
        lo_x = world.X_MIN - world.WALK_MARGIN
        hi_x = world.X_MAX + 1 + world.WALK_MARGIN
        lo_z = world.Z_MIN - world.WALK_MARGIN
        hi_z = world.Z_MAX + 1 + world.WALK_MARGIN
        if not (lo_x <= x <= hi_x and lo_z <= z <= hi_z and 0.0 <= y <= AVATAR_MAX_Y):
            raise world.RuleViolation(f"position {event.pos} outside walkable volume")
        avatar = replace(state.avatar, pos=event.pos, pitch=event.pitch, yaw=event.yaw)
        return replace(state, avatar=avatar)
    if isinstance(event, BlockPlaced):
        return world.place_block(state, event.coord, event.block_id)
    if isinstance(event, BlockRemoved):
        return world.remove_block(state, event.coord)
    return state


def replay_log(initial: WorldState, events: list[GameEvent]) -> WorldState:
    state = initial
    for event in events:
        state = apply_event(state, event)
    return state


def grid_checksum(grid) -> str:
    """FNV-1a over the sorted cell list; the browser client computes the
    same digest to verify its mirror at every turn boundary."""
    h = 0xCBF29CE484222325
    for (x, y, z), block_id in sorted(grid.items()):
        for token in (x, y, z, block_id):
            for ch in f"{token},":
                h ^= ord(ch)
                h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"
