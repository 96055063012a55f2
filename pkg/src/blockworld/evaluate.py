"""Offline evaluation harness: drives a connected builder agent across a
task set with a scripted architect, scores each episode from the persisted
log, and aggregates a weighted leaderboard row.

The architect speaks the restricted command grammar, so a reference agent
completes tasks exactly; learned agents wrapped by the toolkit are driven
the same way. Unrun episodes (budget expiry, failures) score 0 with weight
|T|, so idling and crashing cost the same.
"""
from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass

import httpx

from . import events as ev
from .client import ArchitectClient, WireError
from .metrics import ScoreReport, grid_f1
from .palette import Palette
from .server.sessions import Task
from .world import BlockGrid, DeltaEntry, GridDelta, diff

log = logging.getLogger(__name__)

MAX_TURNS_PER_EPISODE = 10
COORDS_PER_CLAUSE = 6


class AgentUnreachable(Exception):
    pass


@dataclass
class EvalRunConfig:
    task_set_path: str
    agent_endpoint: str  # game stream, host:port
    admin_endpoint: str  # http base url
    agent_id: str = "agent"
    episodes_per_task: int = 2
    time_budget_minutes: float = 60.0
    seed: int | None = None
    parallel: int = 1
    no_shift: bool = False
    label: str | None = None

    def __post_init__(self):
        if self.episodes_per_task < 1:
            raise ValueError("episodes_per_task must be >= 1")
        if self.time_budget_minutes <= 0:
            raise ValueError("time budget must be positive")


@dataclass
class EpisodeResult:
    task_id: str
    episode: int
    target_size: int
    report: ScoreReport
    ran: bool
    note: str = ""

    def to_json(self) -> dict:
        out = {"taskId": self.task_id, "episode": self.episode,
               "targetSize": self.target_size, "ran": self.ran}
        out.update(self.report.to_json())
        if self.note:
            out["note"] = self.note
        return out


def load_task_set(path: str) -> list[Task]:
    import json
    from pathlib import Path

    payload = json.loads(Path(path).read_text())
    entries = payload["tasks"] if isinstance(payload, dict) else payload
    return [Task.from_json(entry) for entry in entries]


def render_commands(delta: GridDelta, palette: Palette) -> str:
    """Target diff -> grammar instruction; adds bottom-up, removes top-down,
    grouped by color in clauses the reference builder parses exactly."""
    adds = sorted(
        (e for e in delta.entries if e.op == "add"),
        key=lambda e: (e.coord.y, e.coord.x, e.coord.z),
    )
    removes = sorted(
        (e for e in delta.entries if e.op == "remove"),
        key=lambda e: (-e.coord.y, e.coord.x, e.coord.z),
    )
    clauses = []
    for verb, entries in (("remove", removes), ("put", adds)):
        pending: list[DeltaEntry] = []

        def flush():
            if not pending:
                return
            color = palette.name_of(pending[0].block_id)
            noun = "block" if len(pending) == 1 else "blocks"
            coords = " ".join(f"({e.coord.x},{e.coord.y},{e.coord.z})" for e in pending)
            clauses.append(f"{verb} {len(pending)} {color} {noun} at {coords}")
            pending.clear()

        for entry in entries:
            if pending and (
                entry.block_id != pending[0].block_id or len(pending) >= COORDS_PER_CLAUSE
            ):
                flush()
            pending.append(entry)
        flush()
    return "; ".join(clauses)


async def _check_agent_registered(config: EvalRunConfig) -> None:
    try:
        async with httpx.AsyncClient() as http:
            reply = await http.get(f"{config.admin_endpoint}/admin/agents", timeout=10)
            reply.raise_for_status()
            agents = {a["agentId"] for a in reply.json()}
    except (httpx.HTTPError, OSError) as e:
        raise AgentUnreachable(f"admin endpoint unreachable: {e}") from None
    if config.agent_id not in agents:
        raise AgentUnreachable(
            f"agent {config.agent_id!r} is not registered at the server"
        )


async def _upload_tasks(config: EvalRunConfig, tasks: list[Task]) -> None:
    async with httpx.AsyncClient() as http:
        for task in tasks:
            reply = await http.post(
                f"{config.admin_endpoint}/admin/tasks", json=task.to_json(), timeout=10
            )
            reply.raise_for_status()


async def _run_episode(
    config: EvalRunConfig, task: Task, episode: int, palette: Palette
) -> EpisodeResult:
    target_delta = task.target_delta()
    async with httpx.AsyncClient() as http:
        reply = await http.post(
            f"{config.admin_endpoint}/admin/join-codes",
            json={"agentId": config.agent_id, "taskId": task.id},
            timeout=10,
        )
        reply.raise_for_status()
        code = reply.json()["code"]

        architect = await ArchitectClient.connect(config.agent_endpoint,
                                                  human_id="eval-harness")
        try:
            await architect.join(code)
            for _ in range(MAX_TURNS_PER_EPISODE):
                remaining = diff(architect.grid, task.target_grid)
                if not len(remaining):
                    break
                await architect.send_chat(render_commands(remaining, palette))
                await architect.end_turn()
                await architect.wait_builder_turn_end(timeout=60)
            await architect.end_game(architect.grid == task.target_grid)
            completion = await architect.wait_completion_code()
        finally:
            await architect.close()

        log_reply = await http.get(
            f"{config.admin_endpoint}/admin/logs/{completion}", timeout=10
        )
        log_reply.raise_for_status()
        payload = log_reply.json()

    events = [ev.from_wire(entry["event"]) for entry in payload["events"]]
    steps = sum(1 for e in events if isinstance(e, ev.BUILDER_ACTION_KINDS))
    final = BlockGrid.from_blocks(payload["meta"]["finalBlocks"])
    report = grid_f1(
        final, task.initial_grid, target_delta,
        search_shifts=not config.no_shift, episode_length=steps,
    )
    return EpisodeResult(task.id, episode, len(target_delta), report, ran=True)


def _zero_result(task: Task, episode: int, note: str) -> EpisodeResult:
    return EpisodeResult(
        task_id=task.id,
        episode=episode,
        target_size=len(task.target_delta()),
        report=ScoreReport(0.0, 0.0, 0.0, 0, (0, 0), 0),
        ran=False,
        note=note,
    )


async def run_evaluation(config: EvalRunConfig) -> dict:
    """Run episodes_per_task episodes of every task and aggregate the row."""
    tasks = load_task_set(config.task_set_path)
    palette = Palette.default()
    await _check_agent_registered(config)
    await _upload_tasks(config, tasks)

    schedule = [
        (task, episode)
        for task in tasks
        for episode in range(config.episodes_per_task)
    ]
    budget_seconds = config.time_budget_minutes * 60.0
    per_episode_timeout = budget_seconds / len(schedule)
    started = time.monotonic()
    semaphore = asyncio.Semaphore(max(1, config.parallel))
    results: list[EpisodeResult] = []

    async def bounded(task: Task, episode: int) -> EpisodeResult:
        async with semaphore:
            if time.monotonic() - started > budget_seconds:
                return _zero_result(task, episode, "BudgetExceeded")
            try:
                return await asyncio.wait_for(
                    _run_episode(config, task, episode, palette),
                    timeout=per_episode_timeout,
                )
            except asyncio.TimeoutError:
                return _zero_result(task, episode, "BudgetExceeded")
            except (WireError, httpx.HTTPError, OSError) as e:
                log.warning("episode %s/%d failed: %s", task.id, episode, e)
                return _zero_result(task, episode, f"failed: {e}")

    if config.parallel <= 1:
        for task, episode in schedule:
            results.append(await bounded(task, episode))
    else:
        results = list(await asyncio.gather(
            *(bounded(task, episode) for task, episode in schedule)
        ))

    return build_leaderboard_row(config, results)


def build_leaderboard_row(config: EvalRunConfig, results: list[EpisodeResult]) -> dict:
    total_weight = sum(r.target_size for r in results) or 1
    weighted = lambda get: sum(get(r.report) * r.target_size for r in results) / total_weight
    ran = [r for r in results if r.ran]
    episode_length = (
        sum(r.report.episode_length for r in ran) / len(ran) if ran else 0.0
    )
    return {
        "agent": config.label or config.agent_id,
        "f1": round(weighted(lambda s: s.f1), 6),
        "precision": round(weighted(lambda s: s.precision), 6),
        "recall": round(weighted(lambda s: s.recall), 6),
        "episodeLength": round(episode_length, 2),
        "submissions": len(ran),
        "episodes": [r.to_json() for r in results],
    }
