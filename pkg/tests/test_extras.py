"""Cross-cutting paths: WS-bridge architect, parallel evaluation, config
overrides, report figures, and budget-forced turn ends."""
import asyncio
import json

import httpx
import pytest

from blockworld import events as ev
from blockworld.agent import GrammarBuilder, connect, run_agent
from blockworld.config import load_config
from blockworld.dataset import BUILDER, load_records
from blockworld.evaluate import EvalRunConfig, run_evaluation
from blockworld.metrics import GameOutcome, ScoreReport, tally_human_eval
from blockworld.reports import (
    write_classify_report,
    write_leaderboard_report,
    write_stats_report,
    write_tally_report,
)
from blockworld.server.net import GameServer
from blockworld.server.service import GameService
from blockworld.server.sessions import Task
from blockworld.server.storage import MemoryStorage
from blockworld.world import BlockGrid

from fixtures import EXAMPLE_BUILDER


def run(coro, timeout=60):
    return asyncio.run(asyncio.wait_for(coro, timeout=timeout))


TARGET = BlockGrid({(0, 0, 0): 50, (1, 0, 0): 50})


async def make_server(step_budget=250):
    service = GameService(MemoryStorage(), seed=2, step_budget=step_budget)
    service.create_task(Task(id="t1", initial_grid=BlockGrid(), target_grid=TARGET))
    server = GameServer(service, game_port=0, http_port=0,
                        heartbeat_seconds=30, sweep_seconds=60)
    await server.start()
    return server, service


class TestWsArchitect:
    def test_browser_style_flow_over_websocket(self):
        async def scenario():
            import websockets

            server, service = await make_server()
            try:
                agent_conn = await connect(server.endpoints["game"], "bot")
                agent_task = asyncio.create_task(
                    run_agent(agent_conn, GrammarBuilder(), games=1)
                )
                async with httpx.AsyncClient() as http:
                    code = (await http.post(
                        f"{server.endpoints['http']}/admin/join-codes",
                        json={"agentId": "bot", "taskId": "t1"},
                    )).json()["code"]

                async with websockets.connect(server.endpoints["ws"]) as sock:
                    async def send(payload):
                        await sock.send(json.dumps(payload))

                    async def recv_until(predicate):
                        while True:
                            msg = json.loads(await asyncio.wait_for(sock.recv(), 10))
                            if msg.get("type") == "heartbeat":
                                continue
                            if predicate(msg):
                                return msg

                    await send({"type": "join", "code": code, "humanId": "browser"})
                    joined = await recv_until(lambda m: m.get("type") == "joined")
                    session_id = joined["sessionId"]
                    await send({"type": "event", "sessionId": session_id,
                                "event": {"kind": "ChatMessage", "role": "architect",
                                          "text": "put 2 blue blocks at (0,0,0) (1,0,0)"}})
                    await send({"type": "event", "sessionId": session_id,
                                "event": {"kind": "TurnEnded", "role": "architect"}})
                    await recv_until(
                        lambda m: m.get("event", {}).get("kind") == "TurnEnded"
                        and m["event"].get("role") == "builder"
                    )
                    checksum = await recv_until(lambda m: m.get("type") == "checksum")
                    session = service.sessions[session_id]
                    assert checksum["value"] == ev.grid_checksum(session.world_state.grid)
                    assert session.world_state.grid == TARGET
                    await send({"type": "event", "sessionId": session_id,
                                "event": {"kind": "GameEnded", "success": True,
                                          "reporter": "architect"}})
                    done = await recv_until(lambda m: m.get("type") == "completion_code")
                    assert service.storage.session_for_code(done["code"]) == session_id
                await agent_task
                await agent_conn.close()
            finally:
                await server.stop()

        run(scenario())


class TestParallelEvaluation:
    def test_two_agents_two_workers(self, tmp_path):
        tasks = [
            {"id": f"row-{i}", "initialBlocks": [],
             "targetBlocks": [[i - 2, 63, 0, 50], [i - 1, 63, 0, 50]]}
            for i in range(2)
        ]
        tasks_path = tmp_path / "tasks.json"
        tasks_path.write_text(json.dumps(tasks))

        async def scenario():
            server, _ = await make_server()
            try:
                conns = []
                for name in ("bot-a", "bot-b"):
                    conn = await connect(server.endpoints["game"], name)
                    asyncio.create_task(run_agent(conn, GrammarBuilder(), games=None))
                    conns.append(conn)
                # two single-agent runs concurrently against one server;
                # each run is sequential internally (one agent serves one
                # live session at a time)
                rows = await asyncio.gather(*(
                    run_evaluation(EvalRunConfig(
                        task_set_path=str(tasks_path),
                        agent_endpoint=server.endpoints["game"],
                        admin_endpoint=server.endpoints["http"],
                        agent_id=name,
                        episodes_per_task=1,
                        time_budget_minutes=2.0,
                        parallel=1,
                    ))
                    for name in ("bot-a", "bot-b")
                ))
                for row in rows:
                    assert row["f1"] == 1.0
                    assert row["submissions"] == 2
                for conn in conns:
                    await conn.close()
            finally:
                await server.stop()

        run(scenario())


class TestBudgetForcedTurn:
    def test_agent_survives_forced_turn_end(self):
        async def scenario():
            server, service = await make_server(step_budget=3)
            try:
                from blockworld.client import ArchitectClient

                agent_conn = await connect(server.endpoints["game"], "bot")
                agent_task = asyncio.create_task(
                    run_agent(agent_conn, GrammarBuilder(), games=1)
                )
                async with httpx.AsyncClient() as http:
                    code = (await http.post(
                        f"{server.endpoints['http']}/admin/join-codes",
                        json={"agentId": "bot", "taskId": "t1"},
                    )).json()["code"]
                architect = await ArchitectClient.connect(server.endpoints["game"])
                await architect.join(code)
                # needs more than 3 wire events: the server force-ends the turn
                await architect.send_chat(
                    "put 2 blue blocks at (5,0,5) (4,0,4); put 1 red block at (0,0,0)"
                )
                await architect.end_turn()
                await architect.wait_builder_turn_end(timeout=20)
                session = service.sessions[architect.session_id]
                forced = [a.event for a in session.log
                          if isinstance(a.event, ev.TurnEnded) and a.event.role == "builder"]
                assert forced, "builder turn should have ended"
                builder_steps = sum(
                    1 for a in session.log if isinstance(a.event, ev.BUILDER_ACTION_KINDS)
                )
                # the toolkit stops within budget (leaving expansion headroom)
                # rather than letting the server force-end its turn
                assert 0 < builder_steps <= 3
                await architect.end_game(False)
                await architect.wait_completion_code()
                await agent_task
                await architect.close()
                await agent_conn.close()
            finally:
                await server.stop()

        run(scenario())


class TestEvaluateCli:
    def test_full_command_against_served_process(self, tmp_path):
        import socket
        import subprocess
        import sys

        def free_port():
            with socket.socket() as s:
                s.bind(("127.0.0.1", 0))
                return s.getsockname()[1]

        game_port, http_port = free_port(), free_port()
        tasks_path = tmp_path / "tasks.json"
        tasks_path.write_text(json.dumps([
            {"id": "cli-task", "initialBlocks": [],
             "targetBlocks": [[0, 63, 0, 50], [1, 63, 0, 50]]},
        ]))
        server_proc = subprocess.Popen(
            [sys.executable, "-m", "blockworld.cli", "serve",
             "--storage-root", str(tmp_path / "data"),
             "--game-port", str(game_port), "--http-port", str(http_port)],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        try:
            while True:
                line = server_proc.stdout.readline()
                assert line, "server died before banner"
                if "websocket" in line:
                    break

            async def scenario():
                conn = await connect(f"127.0.0.1:{game_port}", "cli-bot")
                agent_task = asyncio.create_task(
                    run_agent(conn, GrammarBuilder(), games=None)
                )
                eval_proc = await asyncio.create_subprocess_exec(
                    sys.executable, "-m", "blockworld.cli", "evaluate",
                    "--tasks", str(tasks_path),
                    "--server", f"127.0.0.1:{game_port}",
                    "--admin", f"http://127.0.0.1:{http_port}",
                    "--agent-id", "cli-bot",
                    "--episodes-per-task", "1",
                    "--budget-minutes", "2",
                    "--seed", "3",
                    "--out", str(tmp_path / "results"),
                    "--json",
                    stdout=asyncio.subprocess.PIPE,
                    stderr=asyncio.subprocess.PIPE,
                )
                out, err = await asyncio.wait_for(eval_proc.communicate(), timeout=45)
                assert eval_proc.returncode == 0, err.decode()
                row = json.loads(out)
                agent_task.cancel()
                await conn.close()
                return row

            row = run(scenario(), timeout=60)
            assert row["f1"] == 1.0
            assert row["agent"] == "cli-bot"
            out_dir = tmp_path / "results"
            assert (out_dir / "leaderboard.json").exists()
            assert (out_dir / "episodes.csv").exists()
            assert (out_dir / "episode_f1.png").exists()
        finally:
            server_proc.terminate()
            server_proc.wait(timeout=10)


class TestConfig:
    def test_env_overrides(self, tmp_path):
        config_file = tmp_path / "server.json"
        config_file.write_text(json.dumps({"step_budget": 99, "host": "0.0.0.0"}))
        config = load_config(config_file, env={
            "BLOCKWORLD_STEP_BUDGET": "123",
            "BLOCKWORLD_SESSION_MINUTES": "5.5",
            "BLOCKWORLD_STORAGE_ROOT": "/tmp/x",
        })
        assert config.step_budget == 123
        assert config.session_minutes == 5.5
        assert config.storage_root == "/tmp/x"
        assert config.host == "0.0.0.0"

    def test_unknown_key_rejected(self, tmp_path):
        config_file = tmp_path / "server.json"
        config_file.write_text(json.dumps({"stepBudget": 99}))
        with pytest.raises(ValueError):
            load_config(config_file)


class TestReportFiles:
    def test_figures_rendered(self, tmp_path):
        from blockworld.dataset import DatasetStats

        stats = DatasetStats(instruction_count=2, avg_instruction_words=6.0)
        written = write_stats_report(
            stats, tmp_path / "stats",
            instruction_word_counts=[5, 7, 7, 9],
            question_categories={"Color": 2, "Other": 1},
        )
        names = {p.name for p in written}
        assert {"stats.json", "stats.txt", "stats.csv",
                "instruction_lengths.png", "question_categories.png"} <= names

        row = {
            "agent": "bot", "f1": 1.0, "precision": 1.0, "recall": 1.0,
            "episodeLength": 7.0, "submissions": 2,
            "episodes": [
                {"taskId": "t", "episode": 0, "targetSize": 2, "ran": True,
                 "f1": 1.0, "precision": 1.0, "recall": 1.0, "intersection": 2,
                 "episodeLength": 7},
            ],
        }
        written = write_leaderboard_report(row, tmp_path / "lb")
        assert {"leaderboard.json", "leaderboard.txt", "episodes.csv",
                "episode_f1.png"} <= {p.name for p in written}

        tallies = tally_human_eval([GameOutcome("h", "A", "B", "t", "A")])
        written = write_tally_report(tallies, tmp_path / "tally")
        assert {"tally.json", "tally.txt", "tally.csv", "tally.png"} <= {
            p.name for p in written
        }

        written = write_classify_report(
            [{"structureId": "s0", "labels": ["flat"]}], {"flat": 1}, tmp_path / "cls"
        )
        assert {"labels.json", "labels.csv", "label_counts.png"} <= {
            p.name for p in written
        }
        for path in written:
            assert path.stat().st_size > 0


class TestStringTape:
    def test_tape_as_single_string(self, tmp_path):
        record = dict(EXAMPLE_BUILDER)
        record["tape"] = "\n".join(EXAMPLE_BUILDER["tape"])
        path = tmp_path / "r.json"
        path.write_text(json.dumps(record))
        loaded = load_records(path, BUILDER)
        assert len(loaded[0].tape) == 6
