"""Turn-based game session: the architect/builder state machine.

Pure state, no IO: the service layer owns persistence and fanout. Events
accepted by ``post`` get gapless sequence numbers from 1 and are appended
to an immutable-by-convention log; replaying that log through
``events.apply_event`` reproduces the session's final world.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

from .. import events as ev
from ..world import BlockGrid, GridDelta, WorldState, Avatar, RuleViolation, diff
from ..world import standing_height

DEFAULT_STEP_BUDGET = 250


class WrongPhase(Exception):
    pass


class SessionEnded(Exception):
    pass


class Phase(str, Enum):
    CREATED = "Created"
    ARCHITECT_TURN = "ArchitectTurn"
    BUILDER_TURN = "BuilderTurn"
    ENDED = "Ended"


@dataclass(frozen=True)
class Task:
    id: str
    initial_grid: BlockGrid
    target_grid: BlockGrid

    def __post_init__(self):
        if self.initial_grid == self.target_grid:
            raise ValueError("target grid equals initial grid")

    def target_delta(self) -> GridDelta:
        return diff(self.initial_grid, self.target_grid)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "initialBlocks": self.initial_grid.to_blocks(),
            "targetBlocks": self.target_grid.to_blocks(),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "Task":
        return cls(
            id=str(payload["id"]),
            initial_grid=BlockGrid.from_blocks(payload.get("initialBlocks", [])),
            target_grid=BlockGrid.from_blocks(payload["targetBlocks"]),
        )


@dataclass
class Accepted:
    seq: int
    event: ev.GameEvent

    def envelope(self, session_id: str) -> dict:
        return {"sessionId": session_id, "seq": self.seq, "event": ev.to_wire(self.event)}


@dataclass
class GameSession:
    id: str
    task: Task
    architect_id: str
    builder_id: str
    step_budget: int = DEFAULT_STEP_BUDGET
    builder_display: str | None = None  # participant-facing name (blinded in comparisons)
    hit_id: str | None = None
    created_at: float = field(default_factory=time.time)

    def __post_init__(self):
        spawn = Avatar(pos=(0.0, standing_height(self.task.initial_grid, 0.0, 0.0), 0.0))
        self.phase = Phase.CREATED
        self.world_state = WorldState(grid=self.task.initial_grid, avatar=spawn)
        self.chat_history: list[ev.ChatMessage] = []
        self.log: list[Accepted] = []
        self.steps_used = 0
        self.turn_index = 0
        self.success: bool | None = None
        self.ended_at: float | None = None

    # -- lifecycle ---------------------------------------------------------
    def start(self) -> list[Accepted]:
        if self.phase is not Phase.CREATED:
            raise WrongPhase(f"cannot start in phase {self.phase.value}")
        accepted = [
            self._append(ev.PlayerJoined(ev.ARCHITECT)),
            self._append(ev.PlayerJoined(ev.BUILDER)),
        ]
        self.phase = Phase.ARCHITECT_TURN
        return accepted

    @property
    def live(self) -> bool:
        return self.phase in (Phase.ARCHITECT_TURN, Phase.BUILDER_TURN)

    @property
    def steps_remaining(self) -> int:
        return max(0, self.step_budget - self.steps_used)

    def _append(self, event: ev.GameEvent) -> Accepted:
        entry = Accepted(seq=len(self.log) + 1, event=event)
        self.log.append(entry)
        if isinstance(event, ev.ChatMessage):
            self.chat_history.append(event)
        return entry

    def _phase_for(self, role: str) -> Phase:
        return Phase.ARCHITECT_TURN if role == ev.ARCHITECT else Phase.BUILDER_TURN

    # -- event intake --------------------------------------------------------
    def post(self, event: ev.GameEvent, sender_role: str) -> list[Accepted]:
        """Validate, apply, and log one event; also returns any forced
        follow-up (a builder turn that exhausts its budget ends itself)."""
        if self.phase is Phase.ENDED:
            raise SessionEnded(f"session {self.id} is over")
        if self.phase is Phase.CREATED:
            raise WrongPhase("session not started")
        if sender_role not in ev.ROLES:
            raise RuleViolation(f"unknown role {sender_role!r}")

        if isinstance(event, ev.PlayerJoined):
            raise WrongPhase("PlayerJoined is only emitted at session start")

        if isinstance(event, ev.ChatMessage):
            if event.role != sender_role:
                raise RuleViolation("chat role does not match sender")
            if self.phase is not self._phase_for(sender_role):
                raise WrongPhase(f"{sender_role} cannot chat during {self.phase.value}")
            return [self._append(event)]

        if isinstance(event, ev.BUILDER_ACTION_KINDS):
            if sender_role != ev.BUILDER:
                raise WrongPhase("only the builder moves or edits blocks")
            if self.phase is not Phase.BUILDER_TURN:
                raise WrongPhase("builder actions are accepted only in the builder turn")
            self.world_state = ev.apply_event(self.world_state, event)
            accepted = [self._append(event)]
            self.steps_used += 1
            if self.steps_used >= self.step_budget:
                accepted.extend(self.end_turn(ev.BUILDER))
            return accepted

        if isinstance(event, ev.TurnEnded):
            if event.role != sender_role:
                raise RuleViolation("turn role does not match sender")
            return self.end_turn(sender_role)

        if isinstance(event, ev.GameEnded):
            if sender_role != ev.ARCHITECT or event.reporter != ev.ARCHITECT:
                raise WrongPhase("only the architect ends the game")
            if self.phase is not Phase.ARCHITECT_TURN:
                raise WrongPhase("the game ends during the architect turn")
            return self._seal(event)

        raise RuleViolation(f"unknown event {event!r}")

    def end_turn(self, role: str) -> list[Accepted]:
        if self.phase is Phase.ENDED:
            raise SessionEnded(f"session {self.id} is over")
        if self.phase is not self._phase_for(role):
            raise WrongPhase(f"{role} cannot end the {self.phase.value} turn")
        accepted = [self._append(ev.TurnEnded(role))]
        if role == ev.ARCHITECT:
            self.phase = Phase.BUILDER_TURN
            self.steps_used = 0
        else:
            self.phase = Phase.ARCHITECT_TURN
            self.turn_index += 1
        return accepted

    def force_end(self, success: bool, reporter: str = ev.ARCHITECT) -> list[Accepted]:
        """Seal a session from outside the normal flow (timeouts, vanished
        participants)."""
        if self.phase is Phase.ENDED:
            return []
        return self._seal(ev.GameEnded(success=success, reporter=reporter))

    def _seal(self, event: ev.GameEnded) -> list[Accepted]:
        accepted = [self._append(event)]
        self.phase = Phase.ENDED
        self.success = event.success
        self.ended_at = time.time()
        return accepted

    # -- views ---------------------------------------------------------------
    def events_from(self, seq: int = 0) -> list[Accepted]:
        return [a for a in self.log if a.seq > seq]

    def meta(self) -> dict:
        return {
            "sessionId": self.id,
            "taskId": self.task.id,
            "architect": self.architect_id,
            "builder": self.builder_id,
            "builderDisplay": self.builder_display,
            "hitId": self.hit_id,
            "phase": self.phase.value,
            "success": self.success,
            "stepBudget": self.step_budget,
            "turns": self.turn_index,
            "createdAt": self.created_at,
            "endedAt": self.ended_at,
            "finalBlocks": self.world_state.grid.to_blocks(),
        }
