from .sessions import Accepted, GameSession, Phase, SessionEnded, Task, WrongPhase
from .service import GameService
from .storage import FileStorage, MemoryStorage, Storage
from .queue import TurnQueue
from .net import GameServer, build_app

__all__ = [
    "Accepted",
    "FileStorage",
    "GameServer",
    "GameService",
    "GameSession",
    "MemoryStorage",
    "Phase",
    "SessionEnded",
    "Storage",
    "Task",
    "TurnQueue",
    "WrongPhase",
    "build_app",
]
