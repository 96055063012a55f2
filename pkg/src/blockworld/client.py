"""Asyncio line-protocol clients: the low-level stream client plus the
scripted architect used by the evaluation harness and tests.

Clients keep a local world mirror fed exclusively by acknowledged server
envelopes, so after any event stream the mirror equals the server state.
"""
from __future__ import annotations

import asyncio
import json
from collections import deque
from dataclasses import dataclass, replace

from . import events as ev
from .world import Avatar, BlockGrid, WorldState, standing_height


class ConnectionClosed(Exception):
    pass


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    return host or "127.0.0.1", int(port)


class LineClient:
    """Newline-delimited JSON over one TCP stream."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer
        self.inbox: deque[dict] = deque()

    @classmethod
    async def connect(cls, endpoint: str) -> "LineClient":
        host, port = parse_endpoint(endpoint)
        reader, writer = await asyncio.open_connection(host, port)
        return cls(reader, writer)

    async def send(self, message: dict) -> None:
        self.writer.write(json.dumps(message, separators=(",", ":")).encode() + b"\n")
        await self.writer.drain()

    async def _recv(self) -> dict:
        line = await self.reader.readline()
        if not line:
            raise ConnectionClosed("server closed the stream")
        return json.loads(line)

    async def next_message(self) -> dict:
        """Next message, skipping heartbeats."""
        while True:
            message = self.inbox.popleft() if self.inbox else await self._recv()
            if message.get("type") != "heartbeat":
                return message

    async def request(self, message: dict, reply_types: tuple[str, ...]) -> dict:
        """Send and wait for a control reply, queueing interleaved fanout."""
        await self.send(message)
        while True:
            reply = await self._recv()
            if reply.get("type") in reply_types:
                return reply
            if reply.get("type") != "heartbeat":
                self.inbox.append(reply)

    async def close(self) -> None:
        self.writer.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


@dataclass
class SessionMirror:
    """Client-side session state built purely from server envelopes."""

    session_id: str
    world: WorldState
    step_budget: int
    chat: list[tuple[str, str]]
    turn_index: int = 0
    steps_this_turn: int = 0
    last_seq: int = 0
    phase: str = "ArchitectTurn"
    success: bool | None = None

    @classmethod
    def create(cls, session_id: str, initial_blocks: list, step_budget: int) -> "SessionMirror":
        grid = BlockGrid.from_blocks(initial_blocks)
        avatar = Avatar(pos=(0.0, standing_height(grid, 0.0, 0.0), 0.0))
        return cls(
            session_id=session_id,
            world=WorldState(grid=grid, avatar=avatar),
            step_budget=step_budget,
            chat=[],
        )

    def gap(self, seq: int) -> bool:
        return seq != self.last_seq + 1

    def apply(self, seq: int, event: ev.GameEvent) -> None:
        self.last_seq = seq
        if isinstance(event, ev.ChatMessage):
            self.chat.append((event.role, event.text))
        elif isinstance(event, ev.BUILDER_ACTION_KINDS):
            self.world = mirror_event(self.world, event)
            self.steps_this_turn += 1
        elif isinstance(event, ev.TurnEnded):
            if event.role == ev.ARCHITECT:
                self.phase = "BuilderTurn"
                self.steps_this_turn = 0
            else:
                self.phase = "ArchitectTurn"
                self.turn_index += 1
        elif isinstance(event, ev.GameEnded):
            self.phase = "Ended"
            self.success = event.success

    @property
    def steps_remaining(self) -> int:
        return max(0, self.step_budget - self.steps_this_turn)


def mirror_event(state: WorldState, event: ev.GameEvent) -> WorldState:
    """Apply an already-validated event without re-running world rules."""
    if isinstance(event, ev.PlayerMove):
        avatar = replace(state.avatar, pos=event.pos, pitch=event.pitch, yaw=event.yaw)
        return replace(state, avatar=avatar)
    if isinstance(event, ev.BlockPlaced):
        return replace(state, grid=state.grid.with_block(event.coord, event.block_id))
    if isinstance(event, ev.BlockRemoved):
        return replace(state, grid=state.grid.without_block(event.coord))
    return state


class WireError(Exception):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


class ArchitectClient:
    """Scripted architect: joins with a code, instructs, observes, ends."""

    def __init__(self, client: LineClient, human_id: str = "human"):
        self.client = client
        self.human_id = human_id
        self.session_id: str | None = None
        self.task_json: dict | None = None
        self.builder_name: str | None = None
        self.mirror: SessionMirror | None = None
        self.completion_code: str | None = None

    @classmethod
    async def connect(cls, endpoint: str, human_id: str = "human") -> "ArchitectClient":
        return cls(await LineClient.connect(endpoint), human_id=human_id)

    async def join(self, code: str) -> None:
        reply = await self.client.request(
            {"type": "join", "code": code, "humanId": self.human_id},
            reply_types=("joined", "error"),
        )
        if reply["type"] == "error":
            raise WireError(reply.get("code", "?"), reply.get("detail", ""))
        self.session_id = reply["sessionId"]
        self.task_json = reply["task"]
        self.builder_name = reply.get("builderName")
        self.mirror = SessionMirror.create(
            self.session_id, reply["task"]["initialBlocks"], reply.get("stepBudget", 0)
        )

    async def _post(self, event: ev.GameEvent) -> dict:
        reply = await self.client.request(
            {
                "type": "event",
                "sessionId": self.session_id,
                "event": ev.to_wire(event),
            },
            reply_types=("accepted", "error"),
        )
        if reply["type"] == "error":
            raise WireError(reply.get("code", "?"), reply.get("detail", ""))
        return reply

    async def send_chat(self, text: str) -> None:
        await self._post(ev.ChatMessage(role=ev.ARCHITECT, text=text))

    async def end_turn(self) -> None:
        await self._post(ev.TurnEnded(role=ev.ARCHITECT))

    async def end_game(self, success: bool) -> None:
        await self._post(ev.GameEnded(success=success, reporter=ev.ARCHITECT))

    async def resync(self) -> None:
        await self.client.send(
            {"type": "resync", "sessionId": self.session_id, "fromSeq": 0}
        )
        self.mirror = SessionMirror.create(
            self.session_id, self.task_json["initialBlocks"],
            self.mirror.step_budget if self.mirror else 0,
        )
        while True:
            message = await self.client.next_message()
            if message.get("type") == "resync_complete":
                return
            self._absorb(message)

    def _absorb(self, message: dict) -> None:
        if "seq" in message and "event" in message:
            self.mirror.apply(message["seq"], ev.from_wire(message["event"]))
        elif message.get("type") == "completion_code":
            self.completion_code = message["code"]

    async def pump_until(self, predicate, timeout: float = 10.0):
        """Absorb messages until predicate(message) is true; returns it."""
        async def _pump():
            while True:
                message = await self.client.next_message()
                self._absorb(message)
                if predicate(message):
                    return message

        return await asyncio.wait_for(_pump(), timeout=timeout)

    async def wait_builder_turn_end(self, timeout: float = 30.0) -> None:
        def done(message: dict) -> bool:
            event = message.get("event", {})
            return event.get("kind") == "TurnEnded" and event.get("role") == ev.BUILDER

        await self.pump_until(done, timeout=timeout)

    async def wait_completion_code(self, timeout: float = 10.0) -> str:
        if self.completion_code is None:
            await self.pump_until(
                lambda m: m.get("type") == "completion_code", timeout=timeout
            )
        return self.completion_code

    @property
    def grid(self) -> BlockGrid:
        return self.mirror.world.grid

    async def close(self) -> None:
        await self.client.close()
