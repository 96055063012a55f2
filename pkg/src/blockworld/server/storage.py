"""Persistence behind one interface: a tabular index (sessions, instructions,
verdicts as CSV) plus an object store (full logs, world states, records).

The filesystem implementation is the default; MemoryStorage backs tests.
Event appends are atomic per batch (single buffered write), metadata files
are written via rename.
"""
from __future__ import annotations

import csv
import io
import json
import os
import uuid
from abc import ABC, abstractmethod
from pathlib import Path

INDEX_TABLES = {
    "sessions": ["sessionId", "taskId", "architect", "builder", "hitId", "success",
                 "completionCode"],
    "instructions": ["sessionId", "seq", "role", "text"],
    "verdicts": ["hitId", "taskId", "agentA", "agentB", "winner", "feedback"],
}


class Storage(ABC):
    @abstractmethod
    def save_task(self, task_json: dict) -> None: ...

    @abstractmethod
    def load_tasks(self) -> list[dict]: ...

    @abstractmethod
    def append_events(self, session_id: str, envelopes: list[dict]) -> None: ...

    @abstractmethod
    def read_log(self, session_id: str) -> list[dict]: ...

    @abstractmethod
    def write_meta(self, session_id: str, meta: dict) -> None: ...

    @abstractmethod
    def read_meta(self, session_id: str) -> dict | None: ...

    @abstractmethod
    def add_index_row(self, table: str, row: dict) -> None: ...

    @abstractmethod
    def read_index(self, table: str) -> list[dict]: ...

    @abstractmethod
    def save_record(self, role: str, record_json: dict) -> str: ...

    @abstractmethod
    def map_completion_code(self, code: str, session_id: str) -> None: ...

    @abstractmethod
    def session_for_code(self, code: str) -> str | None: ...

    def list_session_ids(self) -> list[str]:
        raise NotImplementedError


class MemoryStorage(Storage):
    def __init__(self):
        self.tasks: dict[str, dict] = {}
        self.logs: dict[str, list[dict]] = {}
        self.metas: dict[str, dict] = {}
        self.index: dict[str, list[dict]] = {t: [] for t in INDEX_TABLES}
        self.records: dict[str, dict] = {}
        self.codes: dict[str, str] = {}

    def save_task(self, task_json):
        self.tasks[task_json["id"]] = task_json

    def load_tasks(self):
        return list(self.tasks.values())

    def append_events(self, session_id, envelopes):
        self.logs.setdefault(session_id, []).extend(envelopes)

    def read_log(self, session_id):
        return list(self.logs.get(session_id, []))

    def write_meta(self, session_id, meta):
        self.metas[session_id] = meta

    def read_meta(self, session_id):
        return self.metas.get(session_id)

    def add_index_row(self, table, row):
        self.index[table].append(row)

    def read_index(self, table):
        return list(self.index[table])

    def save_record(self, role, record_json):
        record_id = f"{role}-{uuid.uuid4().hex[:12]}"
        self.records[record_id] = record_json
        return record_id

    def map_completion_code(self, code, session_id):
        self.codes[code] = session_id

    def session_for_code(self, code):
        return self.codes.get(code)

    def list_session_ids(self):
        return sorted(self.logs)


class FileStorage(Storage):
    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("tasks", "sessions", "index", "records/architect", "records/builder"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # -- helpers -------------------------------------------------------------
    def _write_atomic(self, path: Path, text: str) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)

    def _csv_path(self, table: str) -> Path:
        return self.root / "index" / f"{table}.csv"

    # -- tasks ---------------------------------------------------------------
    def save_task(self, task_json):
        self._write_atomic(self.root / "tasks" / f"{task_json['id']}.json",
                           json.dumps(task_json, indent=2))

    def load_tasks(self):
        return [json.loads(p.read_text())
                for p in sorted((self.root / "tasks").glob("*.json"))]

    # -- session logs ----------------------------------------------------------
    def _session_dir(self, session_id: str) -> Path:
        d = self.root / "sessions" / session_id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def append_events(self, session_id, envelopes):
        if not envelopes:
            return
        buf = io.StringIO()
        for envelope in envelopes:
            buf.write(json.dumps(envelope, separators=(",", ":")))
            buf.write("\n")
        with open(self._session_dir(session_id) / "log.ndjson", "a") as f:
            f.write(buf.getvalue())
            f.flush()

    def read_log(self, session_id):
        path = self.root / "sessions" / session_id / "log.ndjson"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]

    def write_meta(self, session_id, meta):
        self._write_atomic(self._session_dir(session_id) / "meta.json",
                           json.dumps(meta, indent=2))

    def read_meta(self, session_id):
        path = self.root / "sessions" / session_id / "meta.json"
        return json.loads(path.read_text()) if path.exists() else None

    def list_session_ids(self):
        return sorted(p.name for p in (self.root / "sessions").iterdir() if p.is_dir())

    # -- tabular index -----------------------------------------------------------
    def add_index_row(self, table, row):
        columns = INDEX_TABLES[table]
        path = self._csv_path(table)
        new_file = not path.exists()
        with open(path, "a", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=columns)
            if new_file:
                writer.writeheader()
            writer.writerow({k: row.get(k, "") for k in columns})
            f.flush()

    def read_index(self, table):
        path = self._csv_path(table)
        if not path.exists():
            return []
        with open(path, newline="") as f:
            return list(csv.DictReader(f))

    # -- collected records ----------------------------------------------------
    def save_record(self, role, record_json):
        record_id = f"{role}-{uuid.uuid4().hex[:12]}"
        self._write_atomic(self.root / "records" / role / f"{record_id}.json",
                           json.dumps(record_json, indent=2))
        return record_id

    # -- completion codes -------------------------------------------------------
    def map_completion_code(self, code, session_id):
        path = self.root / "index" / "completion_codes.json"
        mapping = json.loads(path.read_text()) if path.exists() else {}
        mapping[code] = session_id
        self._write_atomic(path, json.dumps(mapping, indent=2))

    def session_for_code(self, code):
        path = self.root / "index" / "completion_codes.json"
        if not path.exists():
            return None
        return json.loads(path.read_text()).get(code)
