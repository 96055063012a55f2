import asyncio
import json

import httpx
import pytest

from blockworld import events as ev
from blockworld.agent import (
    CLARIFYING_QUESTION,
    GrammarBuilder,
    connect,
    noop_policy,
    run_agent,
)
from blockworld.client import ArchitectClient, LineClient, WireError
from blockworld.events import from_wire, replay_log
from blockworld.metrics import grid_f1
from blockworld.server.net import GameServer
from blockworld.server.service import GameService
from blockworld.server.sessions import Task
from blockworld.server.storage import MemoryStorage
from blockworld.world import Avatar, BlockGrid, WorldState, standing_height

TARGET = BlockGrid({(0, 0, 0): 50, (1, 0, 0): 50, (0, 1, 0): 57})
INSTRUCTION = "put 2 blue blocks at (0,0,0) (1,0,0); put 1 yellow block at (0,1,0)"


def run(coro, timeout=30):
    return asyncio.run(asyncio.wait_for(coro, timeout=timeout))


async def make_server():
    service = GameService(MemoryStorage(), seed=11)
    service.create_task(Task(id="t1", initial_grid=BlockGrid(), target_grid=TARGET))
    server = GameServer(service, game_port=0, http_port=0,
                        heartbeat_seconds=0.5, sweep_seconds=60)
    await server.start()
    return server, service


async def mint_code(server, agent_id="bot", task_id="t1"):
    async with httpx.AsyncClient() as http:
        reply = await http.post(
            f"{server.endpoints['http']}/admin/join-codes",
            json={"agentId": agent_id, "taskId": task_id},
        )
        reply.raise_for_status()
        return reply.json()["code"]


class TestWireProtocol:
    def test_scripted_game_end_to_end(self):
        async def scenario():
            server, service = await make_server()
            try:
                agent_conn = await connect(server.endpoints["game"], "bot")
                agent_task = asyncio.create_task(
                    run_agent(agent_conn, GrammarBuilder(), games=1)
                )
                code = await mint_code(server)
                architect = await ArchitectClient.connect(
                    server.endpoints["game"], human_id="alice"
                )
                await architect.join(code)
                assert architect.builder_name == "bot"
                await architect.send_chat(INSTRUCTION)
                await architect.end_turn()
                await architect.wait_builder_turn_end()
                assert architect.grid == TARGET
                await architect.end_game(True)
                completion = await architect.wait_completion_code()
                await agent_task

                # organizers fetch the full log by completion code
                async with httpx.AsyncClient() as http:
                    reply = await http.get(
                        f"{server.endpoints['http']}/admin/logs/{completion}"
                    )
                    reply.raise_for_status()
                    log = reply.json()
                assert log["meta"]["success"] is True
                events = [from_wire(entry["event"]) for entry in log["events"]]
                start = WorldState(
                    grid=BlockGrid(),
                    avatar=Avatar(pos=(0.0, standing_height(BlockGrid(), 0, 0), 0.0)),
                )
                final = replay_log(start, events)
                assert final.grid == TARGET
                assert final.grid == BlockGrid.from_blocks(log["meta"]["finalBlocks"])
                report = grid_f1(final.grid, BlockGrid(),
                                 service.tasks["t1"].target_delta())
                assert report.f1 == 1.0
                await architect.close()
                await agent_conn.close()
            finally:
                await server.stop()

        run(scenario())

    def test_unparseable_instruction_gets_clarifying_question(self):
        async def scenario():
            server, service = await make_server()
            try:
                agent_conn = await connect(server.endpoints["game"], "bot")
                agent_task = asyncio.create_task(
                    run_agent(agent_conn, GrammarBuilder(), games=1)
                )
                code = await mint_code(server)
                architect = await ArchitectClient.connect(server.endpoints["game"])
                await architect.join(code)
                await architect.send_chat("build something nice")
                await architect.end_turn()
                await architect.wait_builder_turn_end()
                questions = [
                    text for role, text in architect.mirror.chat if role == "builder"
                ]
                assert questions == [CLARIFYING_QUESTION]
                assert len(architect.grid) == 0
                await architect.end_game(False)
                await architect.wait_completion_code()
                await agent_task
                await architect.close()
                await agent_conn.close()
            finally:
                await server.stop()

        run(scenario())

    def test_duplicate_agent_id_rejected_on_wire(self):
        async def scenario():
            server, _ = await make_server()
            try:
                first = await connect(server.endpoints["game"], "bot")
                with pytest.raises(WireError) as e:
                    await connect(server.endpoints["game"], "bot")
                assert e.value.code == "DuplicateAgentId"
                await first.close()
            finally:
                await server.stop()

        run(scenario())

    def test_wrong_phase_error_on_wire(self):
        async def scenario():
            server, _ = await make_server()
            try:
                agent_conn = await connect(server.endpoints["game"], "bot")
                agent_task = asyncio.create_task(
                    run_agent(agent_conn, noop_policy, games=1)
                )
                code = await mint_code(server)
                architect = await ArchitectClient.connect(server.endpoints["game"])
                await architect.join(code)
                await architect.end_turn()
                with pytest.raises(WireError) as e:
                    await architect.send_chat("too late, not my turn")
                assert e.value.code == "WrongPhase"
                await architect.wait_builder_turn_end()
                await architect.end_game(False)
                await architect.wait_completion_code()
                await agent_task
                await architect.close()
                await agent_conn.close()
            finally:
                await server.stop()

        run(scenario())

    def test_resync_replays_from_seq(self):
        async def scenario():
            server, _ = await make_server()
            try:
                agent_conn = await connect(server.endpoints["game"], "bot")
                asyncio.create_task(run_agent(agent_conn, noop_policy, games=1))
                code = await mint_code(server)
                architect = await ArchitectClient.connect(server.endpoints["game"])
                await architect.join(code)
                await architect.send_chat("resync check message one two")
                await architect.resync()
                assert architect.mirror.last_seq >= 3
                assert ("architect", "resync check message one two") in architect.mirror.chat
                await architect.close()
                await agent_conn.close()
            finally:
                await server.stop()

        run(scenario())

    def test_heartbeats_flow(self):
        async def scenario():
            server, _ = await make_server()
            try:
                client = await LineClient.connect(server.endpoints["game"])
                message = await asyncio.wait_for(client.reader.readline(), timeout=5)
                assert json.loads(message)["type"] == "heartbeat"
                await client.close()
            finally:
                await server.stop()

        run(scenario())


class TestAdminApi:
    def test_task_crud_and_stats(self):
        async def scenario():
            server, _ = await make_server()
            try:
                base = server.endpoints["http"]
                async with httpx.AsyncClient() as http:
                    reply = await http.post(f"{base}/admin/tasks", json={
                        "id": "t2",
                        "initialBlocks": [],
                        "targetBlocks": [[0, 63, 0, 50]],
                    })
                    assert reply.status_code == 201
                    tasks = (await http.get(f"{base}/admin/tasks")).json()
                    assert {t["id"] for t in tasks} == {"t1", "t2"}
                    stats = (await http.get(f"{base}/admin/stats")).json()
                    assert stats["tasks"] == 2
                    missing = await http.get(f"{base}/admin/logs/bogus")
                    assert missing.status_code == 404
            finally:
                await server.stop()

        run(scenario())

    def test_collection_over_http(self):
        async def scenario():
            server, _ = await make_server()
            try:
                base = server.endpoints["http"]
                async with httpx.AsyncClient() as http:
                    seeded = await http.post(f"{base}/collect/games", json={
                        "startingBlocks": [],
                    })
                    assert seeded.status_code == 201
                    turn = (await http.post(f"{base}/collect/next-turn", json={
                        "annotatorId": "ann1",
                    })).json()["assignment"]
                    assert turn["nextRole"] == "architect"
                    submitted = await http.post(f"{base}/collect/submit", json={
                        "leaseId": turn["leaseId"],
                        "payload": {
                            "tape": ["0 action select_and_place_block 50 0 63 0",
                                     "1 block_change (0, 63, 0, 0, 50)"],
                            "instruction": "put one blue block at the compass center",
                        },
                    })
                    assert submitted.status_code == 200
                    assert len(submitted.json()["recordIds"]) == 2
                    # the instruction author is excluded from executing it
                    own = (await http.post(f"{base}/collect/next-turn", json={
                        "annotatorId": "ann1",
                    })).json()["assignment"]
                    assert own is None
                    other = (await http.post(f"{base}/collect/next-turn", json={
                        "annotatorId": "ann2",
                    })).json()["assignment"]
                    assert other["nextRole"] == "builder"
            finally:
                await server.stop()

        run(scenario())


class TestStaticBundle:
    def test_ui_bundle_served_from_http_port(self):
        from pathlib import Path

        dist = Path(__file__).resolve().parent.parent / "frontend" / "dist"
        if not (dist / "index.html").exists():
            pytest.skip("frontend bundle not built")

        async def scenario():
            service = GameService(MemoryStorage(), seed=3)
            server = GameServer(service, game_port=0, http_port=0, static_dir=dist,
                                heartbeat_seconds=30, sweep_seconds=60)
            await server.start()
            try:
                async with httpx.AsyncClient() as http:
                    index = await http.get(f"{server.endpoints['http']}/")
                    assert index.status_code == 200
                    assert "<div id=\"app\">" in index.text
                    module = await http.get(f"{server.endpoints['http']}/main.js")
                    assert module.status_code == 200
                    assert "WebSocket" in module.text
                    # admin API still reachable alongside the static mount
                    health = await http.get(f"{server.endpoints['http']}/admin/health")
                    assert health.json() == {"ok": True}
            finally:
                await server.stop()

        run(scenario())


class TestWebSocketBridge:
    def test_ws_carries_the_line_protocol(self):
        async def scenario():
            server, _ = await make_server()
            try:
                import websockets

                agent_conn = await connect(server.endpoints["game"], "bot")
                asyncio.create_task(run_agent(agent_conn, noop_policy, games=1))
                code = await mint_code(server)
                async with websockets.connect(server.endpoints["ws"]) as sock:
                    await sock.send(json.dumps({
                        "type": "join", "code": code, "humanId": "browser",
                    }))
                    seen = []
                    while True:
                        message = json.loads(await asyncio.wait_for(sock.recv(), 5))
                        if message.get("type") == "heartbeat":
                            continue
                        seen.append(message)
                        if len([m for m in seen if "seq" in m]) == 2:
                            break
                    kinds = {m.get("type") for m in seen}
                    assert "joined" in kinds
                    seqs = [m["seq"] for m in seen if "seq" in m]
                    assert seqs == [1, 2]
                await agent_conn.close()
            finally:
                await server.stop()

        run(scenario())
