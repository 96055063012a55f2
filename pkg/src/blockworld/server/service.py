"""Session orchestration: agent registry, join/completion codes, event
fanout and persistence, blinded A/B comparisons, and the collection queue.

Network transports (TCP lines, WebSocket) adapt connections to the small
adapter interface used here: an object with ``busy``/``agent_id`` state and
an async ``send(message: dict)``. Everything stateful funnels through one
asyncio loop; a per-session lock serializes each session's event intake.
"""
from __future__ import annotations

import asyncio
import json
import random
import secrets
import time
import uuid
from dataclasses import dataclass, field
from typing import Protocol

from .. import events as ev
from ..metrics import GameOutcome
from .queue import TurnQueue
from .sessions import Accepted, GameSession, Phase, Task
from .storage import Storage

JOIN_CODE_BYTES = 16  # 128 bits, comfortably past the 96-bit floor


class ServiceError(Exception):
    code = "ServiceError"


class UnknownAgent(ServiceError):
    code = "UnknownAgent"


class UnknownTask(ServiceError):
    code = "UnknownTask"


class UnknownSession(ServiceError):
    code = "UnknownSession"


class DuplicateAgentId(ServiceError):
    code = "DuplicateAgentId"


class InvalidCode(ServiceError):
    code = "InvalidCode"


class CodeAlreadyUsed(ServiceError):
    code = "CodeAlreadyUsed"


class AgentUnavailable(ServiceError):
    code = "AgentUnavailable"


class SameAgent(ServiceError):
    code = "SameAgent"


class ComparisonIncomplete(ServiceError):
    code = "ComparisonIncomplete"


class Adapter(Protocol):
    async def send(self, message: dict) -> None: ...


@dataclass
class AgentHandle:
    agent_id: str
    adapter: Adapter
    busy: bool = False
    session_id: str | None = None


@dataclass
class JoinCodeRecord:
    code: str
    agent_id: str
    task_id: str
    display: str
    hit_id: str | None = None
    slot: str | None = None
    used: bool = False


@dataclass
class Comparison:
    hit_id: str
    task_id: str
    slots: dict[str, str]  # "Agent 1"/"Agent 2" -> real agent id
    codes: dict[str, str]  # slot -> join code
    session_ids: dict[str, str] = field(default_factory=dict)
    verdict_slot: str | None = None
    feedback: dict[str, str] = field(default_factory=dict)

    def public_json(self) -> dict:
        """Participant-facing view: real agent ids never appear."""
        return {
            "hitId": self.hit_id,
            "taskId": self.task_id,
            "slots": list(self.slots.keys()),
            "joinCodes": dict(self.codes),
            "gamesEnded": sorted(self.session_ids),
            "verdict": self.verdict_slot,
        }


def mint_code() -> str:
    return secrets.token_urlsafe(JOIN_CODE_BYTES)


class GameService:
    def __init__(
        self,
        storage: Storage,
        step_budget: int = 250,
        session_minutes: float = 20.0,
        lease_minutes: float = 30.0,
        seed: int | None = None,
        now=time.time,
    ):
        self.storage = storage
        self.step_budget = step_budget
        self.session_seconds = session_minutes * 60.0
        self.now = now
        self.rng = random.Random(seed)
        self.tasks: dict[str, Task] = {
            t["id"]: Task.from_json(t) for t in storage.load_tasks()
        }
        self.agents: dict[str, AgentHandle] = {}
        self.sessions: dict[str, GameSession] = {}
        self.join_codes: dict[str, JoinCodeRecord] = {}
        self.comparisons: dict[str, Comparison] = {}
        self.queue = TurnQueue(lease_seconds=lease_minutes * 60.0, now=now)
        self._participants: dict[str, Adapter] = {}  # session -> architect adapter
        self._locks: dict[str, asyncio.Lock] = {}

    # -- registry ------------------------------------------------------------
    def register_agent(self, agent_id: str, adapter: Adapter) -> AgentHandle:
        if agent_id in self.agents:
            raise DuplicateAgentId(f"agent {agent_id!r} is already connected")
        handle = AgentHandle(agent_id=agent_id, adapter=adapter)
        self.agents[agent_id] = handle
        return handle

    async def unregister_agent(self, agent_id: str) -> None:
        handle = self.agents.pop(agent_id, None)
        if handle and handle.session_id:
            session = self.sessions.get(handle.session_id)
            if session and session.live:
                await self._seal_from_outside(session, success=False, reporter=ev.BUILDER)

    def create_task(self, task: Task) -> Task:
        self.tasks[task.id] = task
        self.storage.save_task(task.to_json())
        return task

    def get_task(self, task_id: str) -> Task:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise UnknownTask(f"no task {task_id!r}") from None

    # -- codes and joining ------------------------------------------------------
    def mint_join_code(
        self,
        agent_id: str,
        task_id: str,
        display: str | None = None,
        hit_id: str | None = None,
        slot: str | None = None,
    ) -> str:
        if agent_id not in self.agents:
            raise UnknownAgent(f"agent {agent_id!r} is not connected")
        if task_id not in self.tasks:
            raise UnknownTask(f"no task {task_id!r}")
        code = mint_code()
        self.join_codes[code] = JoinCodeRecord(
            code=code, agent_id=agent_id, task_id=task_id,
            display=display or agent_id, hit_id=hit_id, slot=slot,
        )
        return code

    def _lock(self, session_id: str) -> asyncio.Lock:
        return self._locks.setdefault(session_id, asyncio.Lock())

    async def join_game(self, code: str, human_id: str, participant: Adapter) -> GameSession:
        record = self.join_codes.get(code)
        if record is None:
            raise InvalidCode("unknown join code")
        if record.used:
            raise CodeAlreadyUsed("join code already spent")
        handle = self.agents.get(record.agent_id)
        if handle is None or handle.busy:
            raise AgentUnavailable("agent for this code is not available")
        record.used = True
        handle.busy = True

        session = GameSession(
            id=f"g{uuid.uuid4().hex[:12]}",
            task=self.get_task(record.task_id),
            architect_id=human_id,
            builder_id=record.agent_id,
            step_budget=self.step_budget,
            builder_display=record.display,
            hit_id=record.hit_id,
            created_at=self.now(),
        )
        handle.session_id = session.id
        self.sessions[session.id] = session
        self._participants[session.id] = participant
        if record.hit_id and record.slot:
            self.comparisons[record.hit_id].session_ids[record.slot] = session.id

        async with self._lock(session.id):
            accepted = session.start()
            self.storage.append_events(session.id, [a.envelope(session.id) for a in accepted])
            await participant.send({
                "type": "joined",
                "sessionId": session.id,
                "role": ev.ARCHITECT,
                "task": session.task.to_json(),
                "builderName": session.builder_display,
                "stepBudget": session.step_budget,
            })
            await handle.adapter.send({
                "type": "game_started",
                "sessionId": session.id,
                "role": ev.BUILDER,
                "taskId": session.task.id,
                "initialBlocks": session.task.initial_grid.to_blocks(),
                "stepBudget": session.step_budget,
            })
            await self._fanout(session, accepted)
        return session

    def get_session(self, session_id: str) -> GameSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(f"no session {session_id!r}") from None

    # -- event flow ---------------------------------------------------------
    async def post_event(
        self, session_id: str, sender_role: str, event: ev.GameEvent
    ) -> list[Accepted]:
        session = self.get_session(session_id)
        async with self._lock(session_id):
            accepted = session.post(event, sender_role)
            self._persist(session, accepted)
            await self._fanout(session, accepted)
            if session.phase is Phase.ENDED:
                await self._finalize(session)
        return accepted

    def _persist(self, session: GameSession, accepted: list[Accepted]) -> None:
        self.storage.append_events(
            session.id, [a.envelope(session.id) for a in accepted]
        )
        for a in accepted:
            if isinstance(a.event, ev.ChatMessage):
                self.storage.add_index_row("instructions", {
                    "sessionId": session.id,
                    "seq": a.seq,
                    "role": a.event.role,
                    "text": a.event.text,
                })

    async def _fanout(self, session: GameSession, accepted: list[Accepted]) -> None:
        messages = [a.envelope(session.id) for a in accepted]
        for a in accepted:
            if isinstance(a.event, ev.TurnEnded):
                messages.append({
                    "type": "checksum",
                    "sessionId": session.id,
                    "seq": a.seq,
                    "value": ev.grid_checksum(session.world_state.grid),
                })
        targets: list[Adapter] = []
        participant = self._participants.get(session.id)
        if participant is not None:
            targets.append(participant)
        handle = self.agents.get(session.builder_id)
        if handle is not None and handle.session_id == session.id:
            targets.append(handle.adapter)
        for adapter in targets:
            for message in messages:
                await adapter.send(message)

    async def _finalize(self, session: GameSession) -> None:
        code = mint_code()
        self.storage.map_completion_code(code, session.id)
        meta = session.meta()
        meta["completionCode"] = code
        self.storage.write_meta(session.id, meta)
        self.storage.add_index_row("sessions", {
            "sessionId": session.id,
            "taskId": session.task.id,
            "architect": session.architect_id,
            "builder": session.builder_id,
            "hitId": session.hit_id or "",
            "success": session.success,
            "completionCode": code,
        })
        handle = self.agents.get(session.builder_id)
        if handle is not None and handle.session_id == session.id:
            handle.busy = False
            handle.session_id = None
        participant = self._participants.get(session.id)
        if participant is not None:
            await participant.send({
                "type": "completion_code",
                "sessionId": session.id,
                "code": code,
            })

    async def _seal_from_outside(self, session: GameSession, success: bool, reporter: str):
        async with self._lock(session.id):
            accepted = session.force_end(success=success, reporter=reporter)
            if not accepted:
                return
            self._persist(session, accepted)
            await self._fanout(session, accepted)
            await self._finalize(session)

    async def sweep_expired_sessions(self) -> list[str]:
        """Seal live sessions past the wall-clock cap as unsuccessful."""
        sealed = []
        for session in list(self.sessions.values()):
            if session.live and self.now() - session.created_at > self.session_seconds:
                await self._seal_from_outside(session, success=False, reporter=ev.ARCHITECT)
                sealed.append(session.id)
        return sealed

    def events_from(self, session_id: str, from_seq: int) -> list[dict]:
        session = self.get_session(session_id)
        return [a.envelope(session.id) for a in session.events_from(from_seq)]

    # -- blinded comparisons -----------------------------------------------------
    def create_comparison(self, task_id: str, agent_x: str, agent_y: str) -> Comparison:
        if agent_x == agent_y:
            raise SameAgent("a comparison needs two distinct agents")
        if task_id not in self.tasks:
            raise UnknownTask(f"no task {task_id!r}")
        order = [agent_x, agent_y]
        self.rng.shuffle(order)
        hit_id = f"hit-{uuid.uuid4().hex[:10]}"
        slots = {"Agent 1": order[0], "Agent 2": order[1]}
        comparison = Comparison(hit_id=hit_id, task_id=task_id, slots=slots, codes={})
        self.comparisons[hit_id] = comparison
        for slot, agent_id in slots.items():
            comparison.codes[slot] = self.mint_join_code(
                agent_id, task_id, display=slot, hit_id=hit_id, slot=slot
            )
        return comparison

    def submit_verdict(self, hit_id: str, winner_slot: str,
                       feedback: dict[str, str] | None = None) -> GameOutcome:
        comparison = self.comparisons.get(hit_id)
        if comparison is None:
            raise UnknownSession(f"no comparison {hit_id!r}")
        if winner_slot not in comparison.slots:
            raise ValueError(f"winner must be one of {list(comparison.slots)}")
        for slot in comparison.slots:
            session_id = comparison.session_ids.get(slot)
            if session_id is None or self.sessions[session_id].phase is not Phase.ENDED:
                raise ComparisonIncomplete(f"{slot} game has not ended")
        comparison.verdict_slot = winner_slot
        comparison.feedback = dict(feedback or {})
        outcome = GameOutcome(
            hit_id=hit_id,
            agent_a=comparison.slots["Agent 1"],
            agent_b=comparison.slots["Agent 2"],
            task_id=comparison.task_id,
            winner=comparison.slots[winner_slot],
        )
        self.storage.add_index_row("verdicts", {
            "hitId": outcome.hit_id,
            "taskId": outcome.task_id,
            "agentA": outcome.agent_a,
            "agentB": outcome.agent_b,
            "winner": outcome.winner,
            "feedback": json.dumps(comparison.feedback),
        })
        return outcome

    # -- collection mode ------------------------------------------------------
    def next_open_turn(self, annotator_id: str):
        return self.queue.next_open_turn(annotator_id)

    def submit_single_turn(self, lease_id: str, payload: dict) -> list[str]:
        records = self.queue.submit_single_turn(lease_id, payload)
        ids = []
        for record in records:
            role = "architect" if "command" in record else "builder"
            ids.append(self.storage.save_record(role, record))
        return ids

    # -- reporting ------------------------------------------------------------
    def stats_summary(self) -> dict:
        return {
            "tasks": len(self.tasks),
            "agentsConnected": len(self.agents),
            "sessions": len(self.sessions),
            "sessionsEnded": sum(
                1 for s in self.sessions.values() if s.phase is Phase.ENDED
            ),
            "comparisons": len(self.comparisons),
            "verdicts": len(self.storage.read_index("verdicts")),
        }
