"""Server configuration: JSON file plus environment overrides.

Every key can be overridden by ``BLOCKWORLD_<KEY>`` (upper snake case), e.g.
``BLOCKWORLD_STEP_BUDGET=100`` or ``BLOCKWORLD_STORAGE_ROOT=/var/data``.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

ENV_PREFIX = "BLOCKWORLD_"


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    game_port: int = 7741
    http_port: int = 7742
    storage_root: str = "blockworld-data"
    step_budget: int = 250
    session_minutes: float = 20.0
    lease_minutes: float = 30.0
    heartbeat_seconds: float = 10.0
    sweep_seconds: float = 30.0
    palette_path: str | None = None
    static_dir: str | None = None
    seed: int | None = None

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | Path | None = None, env: dict | None = None) -> ServerConfig:
    values: dict = {}
    if path is not None:
        values.update(json.loads(Path(path).read_text()))
    env = os.environ if env is None else env
    fields = {f.name: f for f in dataclasses.fields(ServerConfig)}
    for name, spec in fields.items():
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            values[name] = env[env_key]
    unknown = set(values) - set(fields)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    coerced = {}
    for name, value in values.items():
        target = fields[name].type
        if value is None or isinstance(value, (int, float)) and "str" not in target:
            coerced[name] = value
        elif "int" in target:
            coerced[name] = int(value)
        elif "float" in target:
            coerced[name] = float(value)
        else:
            coerced[name] = str(value)
    return ServerConfig(**coerced)
