"""Line-oriented action tapes: parse, serialize, replay, verify.

A tape line is ``<step> <kind> <payload>``:

    0 set_look (-0.004, 0)
    2 action step_backward
    4 action select_and_place_block 50 1 63 0
    5 block_change (1, 63, 0, 0, 50)

Tape coordinates are world frame (ground layer at y=63); replay converts
to the build frame on the fly. Recorded pos_change/set_look/block_change
events are authoritative corrections: replay trusts them over the
simulation, which keeps replays robust to kinematics mismatches between
this simulator and whatever produced the tape.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, Union

from . import world
from .world import (
    BreakBlock,
    Coord,
    Jump,
    Move,
    PlaceBlock,
    RuleViolation,
    SetLook,
    WorldState,
)

log = logging.getLogger(__name__)

POSITION_TOLERANCE = 1e-6

PLACE_ACTION = "select_and_place_block"
BREAK_ACTION = "break_block"
JUMP_ACTION = "jump"

_ACTION_ARITIES = {PLACE_ACTION: 4, BREAK_ACTION: 3, JUMP_ACTION: 0}
_ACTION_ARITIES.update({name: 0 for name in world.MOVE_DIRECTIONS})


class ParseError(Exception):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class ReplayDivergence(Exception):
    def __init__(self, step: int, reason: str):
        super().__init__(f"step {step}: {reason}")
        self.step = step
        self.reason = reason


Number = Union[int, float]


@dataclass(frozen=True)
class SetLookEvent:
    step: int
    pitch: Number
    yaw: Number


@dataclass(frozen=True)
class PosChangeEvent:
    step: int
    x: Number
    y: Number
    z: Number


@dataclass(frozen=True)
class ActionEvent:
    step: int
    name: str
    args: tuple[Number, ...] = ()


@dataclass(frozen=True)
class BlockChangeEvent:
    step: int
    x: int
    y: int
    z: int
    old_id: int
    new_id: int

    def __post_init__(self):
        if self.old_id == self.new_id:
            raise ValueError("block_change must change the id")


TapeEvent = Union[SetLookEvent, PosChangeEvent, ActionEvent, BlockChangeEvent]


@dataclass(frozen=True)
class Tape:
    events: tuple[TapeEvent, ...] = ()

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def lines(self) -> list[str]:
        return serialize_tape(self)

    def text(self) -> str:
        return "\n".join(self.lines())


def _parse_number(token: str, line_number: int) -> Number:
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        raise ParseError(line_number, f"non-numeric field {token!r}") from None


def _parse_tuple(payload: str, arity: int, line_number: int) -> list[Number]:
    m = re.fullmatch(r"\(\s*(.*?)\s*\)", payload.strip())
    if not m:
        raise ParseError(line_number, f"expected parenthesized tuple, got {payload!r}")
    parts = [p.strip() for p in m.group(1).split(",")] if m.group(1) else []
    if len(parts) != arity:
        raise ParseError(line_number, f"expected {arity} fields, got {len(parts)}")
    return [_parse_number(p, line_number) for p in parts]


def _parse_int_tuple(payload: str, arity: int, line_number: int) -> list[int]:
    values = _parse_tuple(payload, arity, line_number)
    for v in values:
        if not isinstance(v, int):
            raise ParseError(line_number, f"expected integer field, got {v!r}")
    return values


def parse_tape(lines: Iterable[str]) -> Tape:
    """Parse tape lines (blank lines skipped). Repeated spaces are tolerated;
    serialize_tape canonicalizes them away."""
    events: list[TapeEvent] = []
    last_step = -1
    for line_number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = re.split(r"\s+", line, maxsplit=2)
        if len(parts) < 2:
            raise ParseError(line_number, f"expected '<step> <kind> ...', got {raw!r}")
        step_token, kind = parts[0], parts[1]
        payload = parts[2] if len(parts) > 2 else ""
        try:
            step = int(step_token)
        except ValueError:
            raise ParseError(line_number, f"non-numeric step {step_token!r}") from None
        if step < 0:
            raise ParseError(line_number, f"negative step {step}")
        if step < last_step:
            raise ParseError(line_number, f"step {step} decreases below {last_step}")
        last_step = step

        if kind == "set_look":
            pitch, yaw = _parse_tuple(payload, 2, line_number)
            events.append(SetLookEvent(step, pitch, yaw))
        elif kind == "pos_change":
            x, y, z = _parse_tuple(payload, 3, line_number)
            events.append(PosChangeEvent(step, x, y, z))
        elif kind == "block_change":
            x, y, z, old_id, new_id = _parse_int_tuple(payload, 5, line_number)
            if old_id == new_id:
                raise ParseError(line_number, "block_change ids are equal")
            events.append(BlockChangeEvent(step, x, y, z, old_id, new_id))
        elif kind == "action":
            tokens = re.split(r"\s+", payload.strip()) if payload.strip() else []
            if not tokens:
                raise ParseError(line_number, "action needs a name")
            name, raw_args = tokens[0], tokens[1:]
            args = tuple(_parse_number(t, line_number) for t in raw_args)
            expected = _ACTION_ARITIES.get(name)
            if expected is not None and len(args) != expected:
                raise ParseError(
                    line_number, f"action {name} takes {expected} args, got {len(args)}"
                )
            events.append(ActionEvent(step, name, args))
        else:
            raise ParseError(line_number, f"unknown kind {kind!r}")
    return Tape(tuple(events))


def _fmt(v: Number) -> str:
    return repr(v)


def serialize_tape(t: Tape) -> list[str]:
    """Canonical text form; parse_tape(serialize_tape(t)) == t."""
    lines = []
    for e in t.events:
        if isinstance(e, SetLookEvent):
            lines.append(f"{e.step} set_look ({_fmt(e.pitch)}, {_fmt(e.yaw)})")
        elif isinstance(e, PosChangeEvent):
            lines.append(f"{e.step} pos_change ({_fmt(e.x)}, {_fmt(e.y)}, {_fmt(e.z)})")
        elif isinstance(e, ActionEvent):
            suffix = "".join(f" {_fmt(a)}" for a in e.args)
            lines.append(f"{e.step} action {e.name}{suffix}")
        elif isinstance(e, BlockChangeEvent):
            lines.append(
                f"{e.step} block_change ({e.x}, {e.y}, {e.z}, {e.old_id}, {e.new_id})"
            )
        else:
            raise TypeError(f"unknown tape event {e!r}")
    return lines


def _to_build_action(e: ActionEvent) -> world.BuildAction | None:
    """Map a recorded action to a simulator action; None for unknown names."""
    if e.name in world.MOVE_DIRECTIONS:
        return Move(e.name)
    if e.name == JUMP_ACTION:
        return Jump()
    if e.name == PLACE_ACTION:
        block_id, x, y, z = e.args
        return PlaceBlock(Coord(int(x), int(y) - world.GROUND_Y, int(z)), int(block_id))
    if e.name == BREAK_ACTION:
        x, y, z = e.args
        return BreakBlock(Coord(int(x), int(y) - world.GROUND_Y, int(z)))
    return None


def _apply_block_change(state: WorldState, e: BlockChangeEvent) -> WorldState:
    c = Coord(e.x, e.y - world.GROUND_Y, e.z)
    observed = state.grid.get(c)
    if observed != e.old_id:
        log.warning("step %d: recorded old id %d but grid holds %d", e.step, e.old_id, observed)
    grid = state.grid.without_block(c) if e.new_id == 0 else (
        state.grid.without_block(c).with_block(c, e.new_id)
    )
    return replace(state, grid=grid)


def replay(t: Tape, initial: WorldState) -> WorldState:
    """Replay a tape from an initial state and return the final state.

    Action events run through the simulator; recorded corrections override
    the result. A correction that contradicts the immediately preceding
    action's simulated effect raises ReplayDivergence (positions compared
    to 1e-6, block changes exactly).
    """
    state = initial
    events = t.events
    for i, e in enumerate(events):
        nxt = events[i + 1] if i + 1 < len(events) else None
        if isinstance(e, ActionEvent):
            action = _to_build_action(e)
            if action is None:
                log.warning("step %d: unknown action %r replayed as no-op", e.step, e.name)
                continue
            simulated_ok = True
            try:
                new_state = world.apply_action(state, action)
            except RuleViolation as err:
                log.warning("step %d: action %s rejected by simulation: %s", e.step, e.name, err)
                new_state, simulated_ok = state, False
            if simulated_ok and isinstance(action, (Move, Jump)) and isinstance(nxt, PosChangeEvent):
                recorded = (float(nxt.x), float(nxt.y) - world.GROUND_Y, float(nxt.z))
                drift = max(abs(a - b) for a, b in zip(new_state.avatar.pos, recorded))
                if drift > POSITION_TOLERANCE:
                    raise ReplayDivergence(
                        nxt.step,
                        f"simulated pos {new_state.avatar.pos} != recorded {recorded}",
                    )
            if simulated_ok and isinstance(action, (PlaceBlock, BreakBlock)) and isinstance(
                nxt, BlockChangeEvent
            ):
                c = Coord(nxt.x, nxt.y - world.GROUND_Y, nxt.z)
                sim_old, sim_new = state.grid.get(c), new_state.grid.get(c)
                if (sim_old, sim_new) != (nxt.old_id, nxt.new_id):
                    raise ReplayDivergence(
                        nxt.step,
                        f"simulated change {(sim_old, sim_new)} != recorded "
                        f"{(nxt.old_id, nxt.new_id)} at {tuple(c)}",
                    )
            state = new_state
        elif isinstance(e, SetLookEvent):
            state = replace(
                state, avatar=replace(state.avatar, pitch=float(e.pitch), yaw=float(e.yaw))
            )
        elif isinstance(e, PosChangeEvent):
            pos = (float(e.x), float(e.y) - world.GROUND_Y, float(e.z))
            state = replace(state, avatar=replace(state.avatar, pos=pos))
        elif isinstance(e, BlockChangeEvent):
            state = _apply_block_change(state, e)
        else:
            raise TypeError(f"unknown tape event {e!r}")
    return state


def verify_builder_record(record, initial: WorldState | None = None) -> bool:
    """True iff replaying the record's tape reproduces its recorded ending
    blocks exactly (as a set of occupied cells)."""
    start = initial if initial is not None else WorldState.empty()
    final = replay(record.tape, start)
    return final.grid == record.world_ending_state


def record_tape(initial: WorldState, actions: Sequence[world.BuildAction]) -> tuple[Tape, WorldState]:
    """Simulate actions and emit the canonical tape: each action line is
    followed by the recorded correction the data-collection tool would log."""
    events: list[TapeEvent] = []
    state = initial
    step = 0
    for a in actions:
        if isinstance(a, SetLook):
            before = state.avatar.pos
            state = world.apply_action(state, a)
            events.append(SetLookEvent(step, a.pitch, a.yaw))
            step += 1
            if state.avatar.pos != before:  # settling after a jump shows up here
                x, y, z = state.avatar.pos
                events.append(PosChangeEvent(step, x, y + world.GROUND_Y, z))
                step += 1
            continue
        if isinstance(a, Move):
            state = world.apply_action(state, a)
            events.append(ActionEvent(step, a.direction))
            x, y, z = state.avatar.pos
            events.append(PosChangeEvent(step + 1, x, y + world.GROUND_Y, z))
            step += 2
            continue
        if isinstance(a, Jump):
            state = world.apply_action(state, a)
            events.append(ActionEvent(step, JUMP_ACTION))
            x, y, z = state.avatar.pos
            events.append(PosChangeEvent(step + 1, x, y + world.GROUND_Y, z))
            step += 2
            continue
        if isinstance(a, PlaceBlock):
            old = state.grid.get(a.coord)
            state = world.apply_action(state, a)
            wx, wy, wz = a.coord.x, a.coord.y + world.GROUND_Y, a.coord.z
            events.append(ActionEvent(step, PLACE_ACTION, (a.block_id, wx, wy, wz)))
            events.append(BlockChangeEvent(step + 1, wx, wy, wz, old, a.block_id))
            step += 2
            continue
        if isinstance(a, BreakBlock):
            old = state.grid.get(a.coord)
            state = world.apply_action(state, a)
            wx, wy, wz = a.coord.x, a.coord.y + world.GROUND_Y, a.coord.z
            events.append(ActionEvent(step, BREAK_ACTION, (wx, wy, wz)))
            events.append(BlockChangeEvent(step + 1, wx, wy, wz, old, 0))
            step += 2
            continue
        raise TypeError(f"unknown action {a!r}")
    return Tape(tuple(events)), state
