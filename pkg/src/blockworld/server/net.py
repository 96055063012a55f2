"""Network front end: newline-delimited JSON over TCP for game traffic, an
HTTP admin API, and a WebSocket bridge carrying the same line protocol for
browsers.

Client -> server message types: register_agent, join, event, resync,
heartbeat. Server -> client: registered, joined, game_started, accepted,
completion_code, resync_complete, error, heartbeat, plus the raw event
envelopes ``{"sessionId", "seq", "event"}``.
"""
from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path

import uvicorn
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import events as ev
from ..world import RuleViolation
from . import queue as queuemod
from .service import GameService, ServiceError, UnknownAgent, UnknownSession, UnknownTask
from .sessions import SessionEnded, Task, WrongPhase

log = logging.getLogger(__name__)

HEARTBEAT_SECONDS = 10.0
SWEEP_SECONDS = 30.0


class Connection:
    """One bidirectional ordered stream, TCP or WebSocket."""

    def __init__(self, name: str):
        self.name = name
        self.agent_id: str | None = None
        self.participant_sessions: set[str] = set()
        self._send_lock = asyncio.Lock()
        self.closed = False

    async def send(self, message: dict) -> None:
        line = json.dumps(message, separators=(",", ":")) + "\n"
        async with self._send_lock:
            if self.closed:
                return
            try:
                await self._write(line)
            except (ConnectionError, RuntimeError, OSError):
                self.closed = True

    async def _write(self, line: str) -> None:
        raise NotImplementedError


class TcpConnection(Connection):
    def __init__(self, writer: asyncio.StreamWriter):
        peer = writer.get_extra_info("peername")
        super().__init__(name=f"tcp:{peer}")
        self.writer = writer

    async def _write(self, line: str) -> None:
        self.writer.write(line.encode())
        await self.writer.drain()


class WsConnection(Connection):
    def __init__(self, websocket: WebSocket):
        super().__init__(name="ws")
        self.websocket = websocket

    async def _write(self, line: str) -> None:
        await self.websocket.send_text(line)


class WireProtocol:
    """Dispatches parsed lines against the service."""

    def __init__(self, service: GameService):
        self.service = service
        self.connections: set[Connection] = set()

    async def handle_line(self, conn: Connection, raw: str) -> None:
        raw = raw.strip()
        if not raw:
            return
        try:
            message = json.loads(raw)
        except json.JSONDecodeError as e:
            await conn.send({"type": "error", "code": "BadMessage", "detail": str(e)})
            return
        try:
            await self._dispatch(conn, message)
        except (ServiceError, WrongPhase, SessionEnded, RuleViolation,
                ev.ProtocolError, queuemod.LeaseExpired, queuemod.MissingQuestion,
                queuemod.ValidationError) as e:
            await conn.send({
                "type": "error",
                "code": _error_code(e),
                "detail": str(e),
                "sessionId": message.get("sessionId"),
            })
        except (KeyError, TypeError, ValueError) as e:
            await conn.send({"type": "error", "code": "BadMessage", "detail": repr(e)})

    async def _dispatch(self, conn: Connection, message: dict) -> None:
        kind = message.get("type")
        if kind == "heartbeat":
            return
        if kind == "register_agent":
            agent_id = str(message["agentId"])
            self.service.register_agent(agent_id, conn)
            conn.agent_id = agent_id
            await conn.send({"type": "registered", "agentId": agent_id})
            return
        if kind == "join":
            session = await self.service.join_game(
                str(message["code"]), str(message.get("humanId", "human")), conn
            )
            conn.participant_sessions.add(session.id)
            return
        if kind == "event":
            session_id = str(message["sessionId"])
            role = self._sender_role(conn, session_id)
            event = ev.from_wire(message["event"])
            accepted = await self.service.post_event(session_id, role, event)
            await conn.send({
                "type": "accepted",
                "sessionId": session_id,
                "seqs": [a.seq for a in accepted],
            })
            return
        if kind == "resync":
            session_id = str(message["sessionId"])
            from_seq = int(message.get("fromSeq", 0))
            for envelope in self.service.events_from(session_id, from_seq):
                await conn.send(envelope)
            await conn.send({"type": "resync_complete", "sessionId": session_id})
            return
        raise ev.ProtocolError(f"unknown message type {kind!r}")

    def _sender_role(self, conn: Connection, session_id: str) -> str:
        if session_id in conn.participant_sessions:
            return ev.ARCHITECT
        if conn.agent_id is not None:
            handle = self.service.agents.get(conn.agent_id)
            if handle is not None and handle.session_id == session_id:
                return ev.BUILDER
        raise UnknownSession(f"connection is not part of session {session_id}")

    async def attach(self, conn: Connection) -> None:
        self.connections.add(conn)

    async def detach(self, conn: Connection) -> None:
        self.connections.discard(conn)
        conn.closed = True
        if conn.agent_id is not None:
            await self.service.unregister_agent(conn.agent_id)
        # a vanished human leaves the session to the wall-clock sweep,
        # but stop sending to the dead adapter
        for session_id in conn.participant_sessions:
            if self.service._participants.get(session_id) is conn:
                del self.service._participants[session_id]

    async def heartbeat_all(self) -> None:
        for conn in list(self.connections):
            await conn.send({"type": "heartbeat"})


def _error_code(e: Exception) -> str:
    if isinstance(e, ServiceError):
        return e.code
    if isinstance(e, WrongPhase):
        return "WrongPhase"
    if isinstance(e, SessionEnded):
        return "SessionEnded"
    if isinstance(e, RuleViolation):
        return "RuleViolation"
    if isinstance(e, queuemod.LeaseExpired):
        return "LeaseExpired"
    if isinstance(e, queuemod.MissingQuestion):
        return "MissingQuestion"
    if isinstance(e, queuemod.ValidationError):
        return "ValidationError"
    return "BadMessage"


def _http_error(e: Exception) -> HTTPException:
    status = 404 if isinstance(e, (UnknownAgent, UnknownTask, UnknownSession)) else 400
    return HTTPException(status_code=status, detail={"code": _error_code(e), "detail": str(e)})


def build_app(service: GameService, protocol: WireProtocol,
              static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="blockworld game service")

    @app.exception_handler(ServiceError)
    async def service_error_handler(request, exc: ServiceError):
        err = _http_error(exc)
        return JSONResponse(status_code=err.status_code, content={"detail": err.detail})

    @app.get("/admin/health")
    async def health():
        return {"ok": True}

    @app.post("/admin/tasks", status_code=201)
    async def create_task(payload: dict):
        try:
            task = Task.from_json(payload)
        except (KeyError, ValueError, RuleViolation) as e:
            raise HTTPException(status_code=422, detail=str(e))
        service.create_task(task)
        return task.to_json()

    @app.get("/admin/tasks")
    async def list_tasks():
        return [t.to_json() for t in service.tasks.values()]

    @app.get("/admin/agents")
    async def list_agents():
        return [
            {"agentId": h.agent_id, "busy": h.busy} for h in service.agents.values()
        ]

    @app.post("/admin/join-codes", status_code=201)
    async def mint_join_code(payload: dict):
        code = service.mint_join_code(str(payload["agentId"]), str(payload["taskId"]))
        return {"code": code}

    @app.post("/admin/comparisons", status_code=201)
    async def create_comparison(payload: dict):
        comparison = service.create_comparison(
            str(payload["taskId"]), str(payload["agentA"]), str(payload["agentB"])
        )
        return comparison.public_json()

    @app.get("/admin/comparisons/{hit_id}")
    async def get_comparison(hit_id: str):
        comparison = service.comparisons.get(hit_id)
        if comparison is None:
            raise HTTPException(status_code=404, detail="unknown hit")
        out = comparison.public_json()
        out["gamesEnded"] = [
            slot for slot, sid in comparison.session_ids.items()
            if service.sessions[sid].phase.value == "Ended"
        ]
        return out

    @app.post("/admin/comparisons/{hit_id}/verdict")
    async def submit_verdict(hit_id: str, payload: dict):
        outcome = service.submit_verdict(
            hit_id, str(payload["winner"]), payload.get("feedback")
        )
        return {
            "hitId": outcome.hit_id,
            "taskId": outcome.task_id,
            "agentA": outcome.agent_a,
            "agentB": outcome.agent_b,
            "winner": outcome.winner,
        }

    @app.get("/admin/logs/{completion_code}")
    async def fetch_log(completion_code: str):
        session_id = service.storage.session_for_code(completion_code)
        if session_id is None:
            raise HTTPException(status_code=404, detail="unknown completion code")
        return {
            "meta": service.storage.read_meta(session_id),
            "events": service.storage.read_log(session_id),
        }

    @app.get("/admin/stats")
    async def stats():
        return service.stats_summary()

    @app.post("/collect/games", status_code=201)
    async def seed_collection_game(payload: dict):
        game_id = service.queue.seed_game(
            payload.get("startingBlocks", []), payload.get("structureId")
        )
        return {"gameId": game_id}

    @app.post("/collect/next-turn")
    async def next_turn(payload: dict):
        assignment = service.next_open_turn(str(payload["annotatorId"]))
        return {"assignment": assignment.to_json() if assignment else None}

    @app.post("/collect/submit")
    async def submit_turn(payload: dict):
        try:
            ids = service.submit_single_turn(str(payload["leaseId"]), payload["payload"])
        except (queuemod.LeaseExpired, queuemod.MissingQuestion,
                queuemod.ValidationError) as e:
            raise _http_error(e)
        return {"recordIds": ids}

    @app.websocket("/ws")
    async def websocket_endpoint(websocket: WebSocket):
        await websocket.accept()
        conn = WsConnection(websocket)
        await protocol.attach(conn)
        try:
            while True:
                text = await websocket.receive_text()
                for line in text.splitlines():
                    await protocol.handle_line(conn, line)
        except WebSocketDisconnect:
            pass
        finally:
            await protocol.detach(conn)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


class GameServer:
    """Runs the TCP line endpoint and the HTTP/WS app on one event loop."""

    def __init__(
        self,
        service: GameService,
        host: str = "127.0.0.1",
        game_port: int = 7741,
        http_port: int = 7742,
        static_dir: str | Path | None = None,
        heartbeat_seconds: float = HEARTBEAT_SECONDS,
        sweep_seconds: float = SWEEP_SECONDS,
    ):
        self.service = service
        self.protocol = WireProtocol(service)
        self.host = host
        self.game_port = game_port
        self.http_port = http_port
        self.app = build_app(service, self.protocol, static_dir)
        self.heartbeat_seconds = heartbeat_seconds
        self.sweep_seconds = sweep_seconds
        self._tcp_server: asyncio.base_events.Server | None = None
        self._uvicorn: uvicorn.Server | None = None
        self._tasks: list[asyncio.Task] = []

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        conn = TcpConnection(writer)
        await self.protocol.attach(conn)
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                await self.protocol.handle_line(conn, line.decode())
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            await self.protocol.detach(conn)
            writer.close()

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(
            self._handle_tcp, self.host, self.game_port
        )
        self.game_port = self._tcp_server.sockets[0].getsockname()[1]

        config = uvicorn.Config(
            self.app, host=self.host, port=self.http_port, log_level="warning",
            lifespan="off",
        )
        self._uvicorn = uvicorn.Server(config)
        self._tasks.append(asyncio.create_task(self._uvicorn.serve()))
        while not self._uvicorn.started:
            if self._tasks[0].done():
                self._tasks[0].result()  # surface startup errors (port clash)
            await asyncio.sleep(0.01)
        for server in self._uvicorn.servers:
            for sock in server.sockets:
                self.http_port = sock.getsockname()[1]
        self._tasks.append(asyncio.create_task(self._heartbeat_loop()))
        self._tasks.append(asyncio.create_task(self._sweep_loop()))

    async def _heartbeat_loop(self):
        while True:
            await asyncio.sleep(self.heartbeat_seconds)
            await self.protocol.heartbeat_all()

    async def _sweep_loop(self):
        while True:
            await asyncio.sleep(self.sweep_seconds)
            await self.service.sweep_expired_sessions()

    async def stop(self) -> None:
        """Graceful drain: live sessions seal unsuccessfully, then sockets close."""
        for session in list(self.service.sessions.values()):
            if session.live:
                await self.service._seal_from_outside(
                    session, success=False, reporter=ev.ARCHITECT
                )
        for task in self._tasks[1:]:
            task.cancel()
        if self._uvicorn is not None:
            self._uvicorn.should_exit = True
            await self._tasks[0]
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()

    @property
    def endpoints(self) -> dict:
        return {
            "game": f"{self.host}:{self.game_port}",
            "http": f"http://{self.host}:{self.http_port}",
            "ws": f"ws://{self.host}:{self.http_port}/ws",
        }
