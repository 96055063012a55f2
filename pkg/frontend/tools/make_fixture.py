"""Capture a scripted session transcript from the real game service.

The browser client's tests replay this participant-facing message stream
and must reproduce the server's grid checksum at every turn boundary.
Regenerate with:  python tools/make_fixture.py
"""
import asyncio
import json
from pathlib import Path

from blockworld import events as ev
from blockworld.server.service import GameService
from blockworld.server.sessions import Task
from blockworld.server.storage import MemoryStorage
from blockworld.world import BlockGrid, Coord

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures" / "session_transcript.json"


class Capture:
    def __init__(self):
        self.messages = []

    async def send(self, message):
        self.messages.append(message)


async def main():
    service = GameService(MemoryStorage(), seed=5, step_budget=50)
    task = Task(
        id="fixture",
        initial_grid=BlockGrid({(2, 0, 2): 52}),
        target_grid=BlockGrid({(0, 0, 0): 50, (1, 0, 0): 50, (0, 1, 0): 57, (2, 0, 2): 52}),
    )
    service.create_task(task)
    agent = Capture()
    human = Capture()
    service.register_agent("scripted-bot", agent)
    code = service.mint_join_code("scripted-bot", "fixture")
    session = await service.join_game(code, "fixture-human", human)

    async def post(role, event):
        await service.post_event(session.id, role, event)

    await post("architect", ev.ChatMessage("architect", "put 2 blue blocks at (0,0,0) (1,0,0)"))
    await post("architect", ev.TurnEnded("architect"))
    await post("builder", ev.PlayerMove(pos=(0.4, 0.0, 0.3), pitch=5.0, yaw=-40.0))
    await post("builder", ev.BlockPlaced(coord=Coord(0, 0, 0), block_id=50))
    await post("builder", ev.BlockPlaced(coord=Coord(1, 0, 0), block_id=50))
    await post("builder", ev.BlockPlaced(coord=Coord(1, 1, 0), block_id=54))
    await post("builder", ev.BlockRemoved(coord=Coord(1, 1, 0)))
    await post("builder", ev.ChatMessage("builder", "should the top block be yellow?"))
    await post("builder", ev.TurnEnded("builder"))
    await post("architect", ev.ChatMessage("architect", "put 1 yellow block at (0,1,0)"))
    await post("architect", ev.TurnEnded("architect"))
    await post("builder", ev.BlockPlaced(coord=Coord(0, 1, 0), block_id=57))
    await post("builder", ev.TurnEnded("builder"))
    await post("architect", ev.GameEnded(success=True, reporter="architect"))

    fixture = {
        "note": "captured participant-facing stream from a scripted session",
        "task": task.to_json(),
        "messages": human.messages,
        "finalBlocks": session.world_state.grid.to_blocks(),
        "finalChecksum": ev.grid_checksum(session.world_state.grid),
        "eventCount": len(session.log),
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=2))
    print(f"wrote {OUT} ({len(human.messages)} messages, {len(session.log)} events)")


if __name__ == "__main__":
    asyncio.run(main())
