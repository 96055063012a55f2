"""Asynchronous turn queue for crowd data collection.

Single-turn pipeline: an ideation turn (build freely from a seed canvas for
a minute, then describe the actions as an instruction) opens an execution
turn (another annotator follows the instruction, or marks it unclear and
asks a clarifying question). Turns are leased with a timeout; an expired
lease silently returns the turn to the queue. An annotator never gets both
roles of one game.
"""
from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field

from .. import tape as tapemod
from ..world import BlockGrid, WorldState, Avatar, standing_height

IDEATION_ROLE = "architect"
EXECUTION_ROLE = "builder"

DEFAULT_LEASE_SECONDS = 30 * 60


class LeaseExpired(Exception):
    pass


class MissingQuestion(Exception):
    pass


class ValidationError(Exception):
    pass


@dataclass
class TurnAssignment:
    lease_id: str
    game_id: int
    role: str
    payload: dict
    expires_at: float

    def to_json(self) -> dict:
        return {
            "leaseId": self.lease_id,
            "gameId": self.game_id,
            "nextRole": self.role,
            "payload": self.payload,
            "expiresAt": self.expires_at,
        }


@dataclass
class _Turn:
    game_id: int
    role: str
    payload: dict


@dataclass
class _Game:
    game_id: int
    starting_blocks: list
    structure_id: str | None = None
    instruction: str | None = None
    roles_taken: dict[str, str] = field(default_factory=dict)  # role -> annotator


class TurnQueue:
    def __init__(self, lease_seconds: float = DEFAULT_LEASE_SECONDS, now=time.time):
        self.lease_seconds = lease_seconds
        self.now = now
        self._games: dict[int, _Game] = {}
        self._open: list[_Turn] = []
        self._leases: dict[str, tuple[_Turn, str, float]] = {}
        self._next_game_id = 1

    def seed_game(self, starting_blocks: list, structure_id: str | None = None) -> int:
        """Open a fresh game whose ideation turn starts from the given
        world-frame blocks."""
        game_id = self._next_game_id
        self._next_game_id += 1
        self._games[game_id] = _Game(game_id, list(starting_blocks), structure_id)
        self._open.append(_Turn(game_id, IDEATION_ROLE,
                                {"startingWorldState": {"blocks": list(starting_blocks)}}))
        return game_id

    def _reap_expired(self) -> None:
        now = self.now()
        for lease_id in [k for k, (_, _, exp) in self._leases.items() if exp <= now]:
            turn, _, _ = self._leases.pop(lease_id)
            self._open.append(turn)

    def _other_role(self, role: str) -> str:
        return EXECUTION_ROLE if role == IDEATION_ROLE else IDEATION_ROLE

    def next_open_turn(self, annotator_id: str) -> TurnAssignment | None:
        """Lease the first open turn the annotator is eligible for; None when
        nothing is available (a normal outcome, not an error)."""
        self._reap_expired()
        for i, turn in enumerate(self._open):
            game = self._games[turn.game_id]
            if game.roles_taken.get(self._other_role(turn.role)) == annotator_id:
                continue
            if game.roles_taken.get(turn.role) == annotator_id:
                continue
            del self._open[i]
            lease_id = uuid.uuid4().hex
            expires = self.now() + self.lease_seconds
            self._leases[lease_id] = (turn, annotator_id, expires)
            return TurnAssignment(lease_id, turn.game_id, turn.role, dict(turn.payload), expires)
        return None

    def submit_single_turn(self, lease_id: str, payload: dict) -> list[dict]:
        """Validate a submission and return the dataset records it produces.

        Ideation stores the builder's free-building record plus the
        instruction; execution stores either a consistent tape + ending
        state or an unclear mark with its clarifying question.
        """
        self._reap_expired()
        if lease_id not in self._leases:
            raise LeaseExpired(f"lease {lease_id} is not active")
        turn, annotator, _ = self._leases[lease_id]
        game = self._games[turn.game_id]

        if turn.role == IDEATION_ROLE:
            records = self._ideation_records(game, annotator, payload)
        else:
            records = self._execution_records(game, annotator, payload)

        del self._leases[lease_id]
        game.roles_taken[turn.role] = annotator
        if turn.role == IDEATION_ROLE:
            game.instruction = payload["instruction"].strip()
            self._open.append(_Turn(
                game.game_id, EXECUTION_ROLE,
                {
                    "instruction": game.instruction,
                    "startingWorldState": {"blocks": list(game.starting_blocks)},
                },
            ))
        return records

    def _replay_from_start(self, game: _Game, tape_payload) -> tuple[tapemod.Tape, BlockGrid]:
        lines = tape_payload.splitlines() if isinstance(tape_payload, str) else list(tape_payload)
        try:
            parsed = tapemod.parse_tape(lines)
        except tapemod.ParseError as e:
            raise ValidationError(f"tape does not parse: {e}") from None
        grid = BlockGrid.from_blocks(game.starting_blocks)
        spawn = Avatar(pos=(0.0, standing_height(grid, 0.0, 0.0), 0.0))
        try:
            final = tapemod.replay(parsed, WorldState(grid=grid, avatar=spawn))
        except tapemod.ReplayDivergence as e:
            raise ValidationError(f"tape does not replay: {e}") from None
        return parsed, final.grid

    def _ideation_records(self, game: _Game, annotator: str, payload: dict) -> list[dict]:
        instruction = str(payload.get("instruction", "")).strip()
        if not instruction:
            raise ValidationError("ideation needs an instruction")
        if "tape" not in payload:
            raise ValidationError("ideation needs the recorded tape")
        parsed, ending = self._replay_from_start(game, payload["tape"])
        builder_record = {
            "gameId": game.game_id,
            "stepId": 0,
            "avatarInfo": payload.get("avatarInfo", {"pos": [0, 63, 0], "look": [0, 0]}),
            "worldEndingState": {"blocks": ending.to_blocks()},
            "tape": parsed.lines(),
            "clarification_question": None,
            "annotatorId": annotator,
        }
        architect_record = {
            "gameId": game.game_id,
            "stepId": 1,
            "avatarInfo": {"perspective": payload.get("perspective", "north")},
            "command": instruction,
            "annotatorId": annotator,
        }
        if game.structure_id:
            builder_record["structureId"] = game.structure_id
            architect_record["structureId"] = game.structure_id
        return [builder_record, architect_record]

    def _execution_records(self, game: _Game, annotator: str, payload: dict) -> list[dict]:
        ambiguous = bool(payload.get("ambiguous", False))
        if ambiguous:
            question = str(payload.get("clarification_question") or "").strip()
            if not question:
                raise MissingQuestion(
                    "a submission marked unclear needs a clarifying question"
                )
            record = {
                "gameId": game.game_id,
                "stepId": 2,
                "avatarInfo": payload.get("avatarInfo", {"pos": [0, 63, 0], "look": [0, 0]}),
                "worldEndingState": {"blocks": list(game.starting_blocks)},
                "tape": [],
                "clarification_question": question,
                "clear": False,
                "annotatorId": annotator,
            }
            return [record]
        if "tape" not in payload:
            raise ValidationError("execution needs the recorded tape")
        parsed, ending = self._replay_from_start(game, payload["tape"])
        claimed = payload.get("worldEndingState", {}).get("blocks")
        if claimed is not None and BlockGrid.from_blocks(claimed) != ending:
            raise ValidationError("tape replay does not match the claimed ending state")
        record = {
            "gameId": game.game_id,
            "stepId": 2,
            "avatarInfo": payload.get("avatarInfo", {"pos": [0, 63, 0], "look": [0, 0]}),
            "worldEndingState": {"blocks": ending.to_blocks()},
            "tape": parsed.lines(),
            "clarification_question": None,
            "clear": True,
            "annotatorId": annotator,
        }
        return [record]
