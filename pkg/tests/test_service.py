import asyncio
import json

import pytest

from blockworld import events as ev
from blockworld.events import BlockPlaced, ChatMessage, GameEnded, TurnEnded
from blockworld.server.service import (
    AgentUnavailable,
    CodeAlreadyUsed,
    ComparisonIncomplete,
    DuplicateAgentId,
    GameService,
    InvalidCode,
    SameAgent,
    UnknownAgent,
    UnknownTask,
    mint_code,
)
from blockworld.server.sessions import Phase, Task
from blockworld.server.storage import MemoryStorage
from blockworld.world import BlockGrid, Coord


class FakeAdapter:
    def __init__(self):
        self.messages = []

    async def send(self, message):
        self.messages.append(message)


class Clock:
    def __init__(self):
        self.t = 1000.0

    def __call__(self):
        return self.t


def make_service(seed=7, clock=None):
    service = GameService(MemoryStorage(), seed=seed, now=clock or Clock())
    service.create_task(Task(
        id="t1",
        initial_grid=BlockGrid(),
        target_grid=BlockGrid({(0, 0, 0): 50}),
    ))
    return service


def run(coro):
    return asyncio.run(coro)


async def start_game(service, agent_id="bot", human="alice"):
    agent = FakeAdapter()
    service.register_agent(agent_id, agent)
    code = service.mint_join_code(agent_id, "t1")
    human_adapter = FakeAdapter()
    session = await service.join_game(code, human, human_adapter)
    return session, agent, human_adapter


class TestRegistryAndCodes:
    def test_duplicate_agent_rejected(self):
        service = make_service()
        service.register_agent("bot", FakeAdapter())
        with pytest.raises(DuplicateAgentId):
            service.register_agent("bot", FakeAdapter())

    def test_mint_requires_known_agent_and_task(self):
        service = make_service()
        with pytest.raises(UnknownAgent):
            service.mint_join_code("ghost", "t1")
        service.register_agent("bot", FakeAdapter())
        with pytest.raises(UnknownTask):
            service.mint_join_code("bot", "t404")

    def test_same_pair_gets_distinct_codes(self):
        service = make_service()
        service.register_agent("bot", FakeAdapter())
        assert service.mint_join_code("bot", "t1") != service.mint_join_code("bot", "t1")

    def test_code_uniqueness_across_a_million_mints(self):
        n = 1_000_000
        codes = {mint_code() for _ in range(n)}
        assert len(codes) == n


class TestJoin:
    def test_valid_join(self):
        async def scenario():
            service = make_service()
            session, agent, human = await start_game(service)
            assert session.phase is Phase.ARCHITECT_TURN
            assert session.world_state.grid == BlockGrid()
            joined = [m for m in human.messages if m.get("type") == "joined"]
            assert joined and joined[0]["task"]["id"] == "t1"
            started = [m for m in agent.messages if m.get("type") == "game_started"]
            assert started and started[0]["role"] == "builder"
            assert "targetBlocks" not in started[0]  # builder never sees the target
            fanned = [m for m in agent.messages if "seq" in m]
            assert [m["seq"] for m in fanned] == [1, 2]

        run(scenario())

    def test_reused_code(self):
        async def scenario():
            service = make_service()
            agent = FakeAdapter()
            service.register_agent("bot", agent)
            code = service.mint_join_code("bot", "t1")
            await service.join_game(code, "alice", FakeAdapter())
            with pytest.raises(CodeAlreadyUsed):
                await service.join_game(code, "bob", FakeAdapter())

        run(scenario())

    def test_unknown_code(self):
        async def scenario():
            service = make_service()
            with pytest.raises(InvalidCode):
                await service.join_game("nope", "alice", FakeAdapter())

        run(scenario())

    def test_busy_agent_unavailable(self):
        async def scenario():
            service = make_service()
            service.register_agent("bot", FakeAdapter())
            code1 = service.mint_join_code("bot", "t1")
            code2 = service.mint_join_code("bot", "t1")
            await service.join_game(code1, "alice", FakeAdapter())
            with pytest.raises(AgentUnavailable):
                await service.join_game(code2, "bob", FakeAdapter())

        run(scenario())

    def test_disconnected_agent_unavailable(self):
        async def scenario():
            service = make_service()
            service.register_agent("bot", FakeAdapter())
            code = service.mint_join_code("bot", "t1")
            await service.unregister_agent("bot")
            with pytest.raises(AgentUnavailable):
                await service.join_game(code, "alice", FakeAdapter())

        run(scenario())


async def play_full_game(service, success=True):
    session, agent, human = await start_game(service)
    await service.post_event(
        session.id, "architect", ChatMessage("architect", "put 1 blue block at (0,0,0)")
    )
    await service.post_event(session.id, "architect", TurnEnded("architect"))
    await service.post_event(
        session.id, "builder", BlockPlaced(coord=Coord(0, 0, 0), block_id=50)
    )
    await service.post_event(session.id, "builder", TurnEnded("builder"))
    await service.post_event(
        session.id, "architect", GameEnded(success=success, reporter="architect")
    )
    return session, agent, human


class TestGameFlow:
    def test_full_game_persists_and_releases(self):
        async def scenario():
            service = make_service()
            session, agent, human = await play_full_game(service)
            assert session.phase is Phase.ENDED
            # completion code reached the participant
            codes = [m for m in human.messages if m.get("type") == "completion_code"]
            assert len(codes) == 1
            code = codes[0]["code"]
            sid = service.storage.session_for_code(code)
            assert sid == session.id
            meta = service.storage.read_meta(session.id)
            assert meta["success"] is True
            assert meta["finalBlocks"] == [[0, 63, 0, 50]]
            # log persisted with gapless seq
            log = service.storage.read_log(session.id)
            assert [entry["seq"] for entry in log] == list(range(1, len(log) + 1))
            # agent idle again
            assert not service.agents["bot"].busy
            # exactly one completion code per ended session
            index = service.storage.read_index("sessions")
            assert len(index) == 1

        run(scenario())

    def test_checksum_sent_at_turn_boundaries(self):
        async def scenario():
            service = make_service()
            session, agent, human = await play_full_game(service)
            checksums = [m for m in human.messages if m.get("type") == "checksum"]
            assert len(checksums) == 2  # one per TurnEnded
            assert checksums[-1]["value"] == ev.grid_checksum(session.world_state.grid)
            agent_sums = [m for m in agent.messages if m.get("type") == "checksum"]
            assert [m["value"] for m in agent_sums] == [m["value"] for m in checksums]

        run(scenario())

    def test_chat_indexed(self):
        async def scenario():
            service = make_service()
            await play_full_game(service)
            rows = service.storage.read_index("instructions")
            assert any(r["text"] == "put 1 blue block at (0,0,0)" for r in rows)

        run(scenario())

    def test_agent_disconnect_seals_session(self):
        async def scenario():
            service = make_service()
            session, agent, human = await start_game(service)
            await service.unregister_agent("bot")
            assert session.phase is Phase.ENDED
            assert session.success is False
            meta = service.storage.read_meta(session.id)
            assert meta["success"] is False

        run(scenario())

    def test_wall_clock_sweep(self):
        async def scenario():
            clock = Clock()
            service = make_service(clock=clock)
            session, _, _ = await start_game(service)
            clock.t += 21 * 60
            sealed = await service.sweep_expired_sessions()
            assert sealed == [session.id]
            assert session.phase is Phase.ENDED and session.success is False

        run(scenario())


class TestComparisons:
    def test_requires_distinct_agents(self):
        service = make_service()
        with pytest.raises(SameAgent):
            service.create_comparison("t1", "a", "a")

    def test_deterministic_order_under_seed(self):
        def slots(seed):
            async def scenario():
                service = make_service(seed=seed)
                service.register_agent("alpha", FakeAdapter())
                service.register_agent("beta", FakeAdapter())
                return service.create_comparison("t1", "alpha", "beta").slots

            return run(scenario())

        assert slots(1) == slots(1)
        found = {json.dumps(slots(s)) for s in range(12)}
        assert len(found) == 2  # both orders occur across seeds

    def test_blinding_and_verdict(self):
        async def scenario():
            service = make_service()
            agents = {}
            for name in ("alpha", "beta"):
                adapter = FakeAdapter()
                service.register_agent(name, adapter)
                agents[name] = adapter
            comparison = service.create_comparison("t1", "alpha", "beta")
            assert set(comparison.slots.keys()) == {"Agent 1", "Agent 2"}
            public = comparison.public_json()
            assert "alpha" not in json.dumps(public) and "beta" not in json.dumps(public)

            human = FakeAdapter()
            outcomes = {}
            for slot in ("Agent 1", "Agent 2"):
                code = comparison.codes[slot]
                session = await service.join_game(code, "mturk-1", human)
                assert session.builder_display == slot
                with pytest.raises(ComparisonIncomplete):
                    service.submit_verdict(comparison.hit_id, "Agent 1")
                await service.post_event(
                    session.id, "architect", GameEnded(success=False, reporter="architect")
                )
                outcomes[slot] = session

            outcome = service.submit_verdict(
                comparison.hit_id, "Agent 2", {"Agent 2": "more responsive"}
            )
            assert outcome.winner == comparison.slots["Agent 2"]
            assert outcome.winner in ("alpha", "beta")
            # scan-the-transcript: nothing the human saw names a real agent
            transcript = json.dumps(human.messages)
            assert "alpha" not in transcript and "beta" not in transcript
            # verdict row persisted for the tally
            rows = service.storage.read_index("verdicts")
            assert len(rows) == 1 and rows[0]["winner"] == outcome.winner

        run(scenario())
