"""Builder-agent toolkit: connect to a game server, receive world state and
chat each turn, run a policy, stream its actions, end the turn.

A policy is any callable AgentObservation -> AgentDecision. The toolkit
keeps a local world mirror in lock-step with the server by deriving wire
events from simulated actions (a block placement that changes the builder's
footing is followed by the matching move event), so an acknowledged action
never leaves the two sides disagreeing.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from . import events as ev
from . import world
from .client import ConnectionClosed, LineClient, SessionMirror, WireError
from .palette import Palette
from .tape import Tape, _to_build_action, ActionEvent
from .world import (
    BreakBlock,
    BuildAction,
    Coord,
    Jump,
    Move,
    PlaceBlock,
    SetLook,
    WorldState,
    apply_action,
)

log = logging.getLogger(__name__)

PATH_MOVE_LIMIT = 50


class DesyncError(Exception):
    pass


@dataclass
class AgentObservation:
    world_state: WorldState
    chat_history: list[tuple[str, str]]
    turn_index: int
    step_budget_remaining: int


@dataclass
class AgentDecision:
    actions: list[BuildAction] = field(default_factory=list)
    end_turn: bool = True
    chat: str | None = None  # clarifying question, sent before ending the turn


def noop_policy(obs: AgentObservation) -> AgentDecision:
    return AgentDecision(actions=[], end_turn=True)


class AgentConnection:
    def __init__(self, client: LineClient, agent_id: str):
        self.client = client
        self.agent_id = agent_id
        self.mirror: SessionMirror | None = None
        self.games_finished = 0

    async def close(self) -> None:
        await self.client.close()


async def connect(endpoint: str, agent_id: str) -> AgentConnection:
    """Register as an idle agent; raises ConnectionRefusedError when the
    server is unreachable and DesyncError never (that's run_agent's domain)."""
    client = await LineClient.connect(endpoint)
    reply = await client.request(
        {"type": "register_agent", "agentId": agent_id},
        reply_types=("registered", "error"),
    )
    if reply["type"] == "error":
        await client.close()
        raise WireError(reply.get("code", "?"), reply.get("detail", ""))
    return AgentConnection(client, agent_id)


def _wire_events_for(state: WorldState, action: BuildAction) -> tuple[WorldState, list[ev.GameEvent]]:
    """Simulate one action and derive the wire events that reproduce it."""
    after = apply_action(state, action)
    events: list[ev.GameEvent] = []
    if isinstance(action, (Move, SetLook, Jump)):
        events.append(ev.PlayerMove(pos=after.avatar.pos, pitch=after.avatar.pitch,
                                    yaw=after.avatar.yaw))
    elif isinstance(action, PlaceBlock):
        events.append(ev.BlockPlaced(coord=action.coord, block_id=action.block_id))
        if after.avatar.pos != state.avatar.pos:
            events.append(ev.PlayerMove(pos=after.avatar.pos, pitch=after.avatar.pitch,
                                        yaw=after.avatar.yaw))
    elif isinstance(action, BreakBlock):
        events.append(ev.BlockRemoved(coord=action.coord))
        if after.avatar.pos != state.avatar.pos:
            events.append(ev.PlayerMove(pos=after.avatar.pos, pitch=after.avatar.pitch,
                                        yaw=after.avatar.yaw))
    else:
        raise TypeError(f"unknown action {action!r}")
    return after, events


async def _post_event(conn: AgentConnection, event: ev.GameEvent) -> dict:
    reply = await conn.client.request(
        {
            "type": "event",
            "sessionId": conn.mirror.session_id,
            "event": ev.to_wire(event),
        },
        reply_types=("accepted", "error"),
    )
    if reply["type"] == "error":
        raise WireError(reply.get("code", "?"), reply.get("detail", ""))
    return reply


async def _resync(conn: AgentConnection, initial_blocks: list) -> None:
    await conn.client.send({
        "type": "resync", "sessionId": conn.mirror.session_id, "fromSeq": 0,
    })
    fresh = SessionMirror.create(
        conn.mirror.session_id, initial_blocks, conn.mirror.step_budget
    )
    while True:
        message = await conn.client.next_message()
        if message.get("type") == "resync_complete":
            break
        if "seq" in message and "event" in message:
            fresh.apply(message["seq"], ev.from_wire(message["event"]))
    conn.mirror = fresh


async def _take_turn(conn: AgentConnection, policy, initial_blocks: list) -> None:
    """Run the policy and stream its actions; ends the turn in every path.

    The mirror only advances through server fanout (drained after every
    acknowledged post), so the local grid equals the server grid after each
    accepted event. A rejected action triggers one resync + fresh policy
    invocation before giving up on the turn.
    """
    attempts = 0
    while True:
        mirror = conn.mirror
        obs = AgentObservation(
            world_state=mirror.world,
            chat_history=list(mirror.chat),
            turn_index=mirror.turn_index,
            step_budget_remaining=mirror.steps_remaining,
        )
        decision = policy(obs)
        sim = mirror.world
        desynced = False
        for action in decision.actions:
            if conn.mirror.phase != "BuilderTurn":
                break  # budget exhaustion force-ended the turn
            if conn.mirror.steps_remaining <= 1:
                break  # an action may expand to two wire events
            try:
                sim, wire_events = _wire_events_for(sim, action)
            except world.RuleViolation as e:
                log.warning("agent %s skips illegal action %s: %s", conn.agent_id, action, e)
                sim = conn.mirror.world
                continue
            try:
                for event in wire_events:
                    await _post_event(conn, event)
            except WireError as e:
                log.warning("agent %s desync on %s: %s", conn.agent_id, action, e)
                desynced = True
            _drain_own_events(conn)
            sim = conn.mirror.world
            if desynced:
                break
        if desynced and attempts == 0:
            attempts = 1
            await _resync(conn, initial_blocks)
            continue
        break
    if decision.chat is not None and conn.mirror.phase == "BuilderTurn":
        try:
            await _post_event(conn, ev.ChatMessage(role=ev.BUILDER, text=decision.chat))
            _drain_own_events(conn)
        except WireError as e:
            log.warning("agent %s could not send chat: %s", conn.agent_id, e)
    if conn.mirror.phase == "BuilderTurn":
        try:
            await _post_event(conn, ev.TurnEnded(role=ev.BUILDER))
            _drain_own_events(conn)
        except WireError as e:
            log.warning("agent %s could not end turn: %s", conn.agent_id, e)


def _drain_own_events(conn: AgentConnection) -> None:
    """Apply queued fanout (our accepted events echoed back) to the mirror."""
    while conn.client.inbox:
        message = conn.client.inbox.popleft()
        if "seq" in message and "event" in message and conn.mirror is not None:
            if message.get("sessionId") != conn.mirror.session_id:
                continue
            if message["seq"] <= conn.mirror.last_seq:
                continue
            conn.mirror.apply(message["seq"], ev.from_wire(message["event"]))


async def run_agent(conn: AgentConnection, policy, games: int | None = 1) -> None:
    """Event loop: play builder turns until `games` sessions end (None runs
    until the connection closes)."""
    initial_blocks: list = []
    finished = 0
    while games is None or finished < games:
        try:
            message = await conn.client.next_message()
        except ConnectionClosed:
            return
        kind = message.get("type")
        if kind == "game_started":
            initial_blocks = message["initialBlocks"]
            conn.mirror = SessionMirror.create(
                message["sessionId"], initial_blocks, message["stepBudget"]
            )
            continue
        if conn.mirror is None or "seq" not in message or "event" not in message:
            continue
        if message.get("sessionId") != conn.mirror.session_id:
            continue
        if conn.mirror.gap(message["seq"]):
            await _resync(conn, initial_blocks)
            continue
        event = ev.from_wire(message["event"])
        conn.mirror.apply(message["seq"], event)
        if isinstance(event, ev.TurnEnded) and event.role == ev.ARCHITECT:
            await _take_turn(conn, policy, initial_blocks)
        elif isinstance(event, ev.GameEnded):
            finished += 1
            conn.games_finished += 1
            conn.mirror = None


# --- reference agents -------------------------------------------------------

NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
}

CLARIFYING_QUESTION = (
    "Sorry, I did not understand. Please phrase it like: "
    "put 2 blue blocks at (0,0,0) (1,0,0) or remove 1 red block at (2,0,1)"
)

_CLAUSE_RE = re.compile(
    r"^\s*(put|remove)\s+(\w+)\s+(\w+)\s+blocks?\s+at\s+(.+?)\s*$", re.IGNORECASE
)
_COORD_RE = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")


def parse_commands(text: str, palette: Palette) -> list[tuple[str, int, list[Coord]]] | None:
    """Parse the restricted architect grammar; None when any clause fails.

    Grammar: ``put|remove <count> <color> block(s) at (x,y,z) [(x,y,z) ...]``
    with absolute build-frame coordinates, clauses separated by '.' or ';'.
    """
    clauses = [c for c in re.split(r"[.;]", text) if c.strip()]
    if not clauses:
        return None
    commands = []
    for clause in clauses:
        m = _CLAUSE_RE.match(clause)
        if not m:
            return None
        verb, count_token, color, coords_text = m.groups()
        count_token = count_token.lower()
        if count_token.isdigit():
            count = int(count_token)
        elif count_token in NUMBER_WORDS:
            count = NUMBER_WORDS[count_token]
        else:
            return None
        try:
            block_id = palette.id_of(color)
        except KeyError:
            return None
        coords = [Coord(int(x), int(y), int(z)) for x, y, z in _COORD_RE.findall(coords_text)]
        if len(coords) != count or count == 0:
            return None
        commands.append((verb.lower(), block_id, coords))
    return commands


def _walk_into_reach(state: WorldState, target: Coord) -> tuple[WorldState, list[BuildAction]] | None:
    """Greedy compass walk toward the target column; jump when the last unit
    of height is missing. None when 50 moves were not enough."""
    actions: list[BuildAction] = []

    def placeable(s: WorldState) -> bool:
        return world.reach_distance(s.avatar, target) <= world.REACH_RADIUS

    while len(actions) < PATH_MOVE_LIMIT:
        if placeable(state):
            return state, actions
        candidates = []
        for direction in ("step_north", "step_south", "step_east", "step_west"):
            nxt = apply_action(state, Move(direction))
            candidates.append((world.reach_distance(nxt.avatar, target), direction, nxt))
        candidates.sort(key=lambda c: (c[0], c[1]))
        best_gain, _, best_state = candidates[0]
        if best_gain < world.reach_distance(state.avatar, target) - 1e-9:
            state = apply_action(state, Move(candidates[0][1]))
            actions.append(Move(candidates[0][1]))
            continue
        # no step helps: the missing reach is vertical, try a jump boost
        boosted = apply_action(state, Jump())
        if placeable(boosted):
            actions.append(Jump())
            return boosted, actions
        return None
    if placeable(state):
        return state, actions
    return None


class GrammarBuilder:
    """Deterministic reference builder for the restricted command grammar.

    Unparseable instructions produce a clarifying question and an ended
    turn, exercising the ask-when-unclear loop end to end.
    """

    def __init__(self, palette: Palette | None = None):
        self.palette = palette or Palette.default()

    def __call__(self, obs: AgentObservation) -> AgentDecision:
        instruction = next(
            (text for role, text in reversed(obs.chat_history) if role == ev.ARCHITECT),
            None,
        )
        if instruction is None:
            return AgentDecision(chat=CLARIFYING_QUESTION)
        commands = parse_commands(instruction, self.palette)
        if commands is None:
            return AgentDecision(chat=CLARIFYING_QUESTION)

        state = obs.world_state
        plan: list[BuildAction] = []
        for verb, block_id, coords in commands:
            for coord in coords:
                if verb == "put" and state.grid.get(coord) == block_id:
                    continue  # already satisfied
                if verb == "remove" and coord not in state.grid:
                    continue
                walked = _walk_into_reach(state, coord)
                if walked is None:
                    return AgentDecision(chat=CLARIFYING_QUESTION)
                state, path = walked
                plan.extend(path)
                action: BuildAction = (
                    PlaceBlock(coord, block_id) if verb == "put" else BreakBlock(coord)
                )
                try:
                    state = apply_action(state, action)
                except world.RuleViolation:
                    return AgentDecision(chat=CLARIFYING_QUESTION)
                plan.append(action)
        return AgentDecision(actions=plan, end_turn=True)


class TapeReplayPolicy:
    """Plays back a recorded tape's actions on its first builder turn."""

    def __init__(self, tape: Tape):
        self.actions = [
            a for a in (
                _to_build_action(e) for e in tape.events if isinstance(e, ActionEvent)
            ) if a is not None
        ]
        self.spent = False

    def __call__(self, obs: AgentObservation) -> AgentDecision:
        if self.spent:
            return AgentDecision()
        self.spent = True
        return AgentDecision(actions=list(self.actions), end_turn=True)
