"""Flat-file JSON persistence for sessions and pipeline traces.

Layout under one root directory:

    sessions/<session_id>.json
    traces/<session_id>/<sequence>.json

Writes go through a temp file in the destination directory followed by
os.replace, so readers never observe a half-written record. A per-session
lock serialises writers touching the same session.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path
from typing import Any

from .domain import PipelineTrace, Session
from .errors import CorruptRecordError, IoError, NotFoundError


def dump_record(data: dict[str, Any]) -> str:
    """Canonical on-disk encoding; replay relies on it being stable."""
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


class SessionStore:
    def __init__(self, root: str | Path):
        self._root = Path(root)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        try:
            (self._root / "sessions").mkdir(parents=True, exist_ok=True)
            (self._root / "traces").mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create store root {self._root}: {exc}")

    @property
    def root(self) -> Path:
        return self._root

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _session_path(self, session_id: str) -> Path:
        return self._root / "sessions" / f"{session_id}.json"

    def _trace_path(self, session_id: str, sequence: int) -> Path:
        return self._root / "traces" / session_id / f"{sequence}.json"

    def _write_atomic(self, path: Path, text: str) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(
                dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"
            )
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as handle:
                    handle.write(text)
                    handle.flush()
                    os.fsync(handle.fileno())
                os.replace(tmp_name, path)
            except BaseException:
                try:
                    os.unlink(tmp_name)
                except OSError:
                    pass
                raise
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}")

    def _read_record(self, path: Path) -> dict[str, Any]:
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise NotFoundError(f"no record at {path}")
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorruptRecordError(f"invalid JSON: {exc}", path=str(path))
        if not isinstance(data, dict):
            raise CorruptRecordError("top-level value is not an object", path=str(path))
        return data

    def save_session(self, session: Session) -> None:
        with self._lock_for(session.session_id):
            self._write_atomic(
                self._session_path(session.session_id), dump_record(session.to_dict())
            )

    def load_session(self, session_id: str) -> Session:
        path = self._session_path(session_id)
        data = self._read_record(path)
        try:
            return Session.from_dict(data)
        except (KeyError, ValueError, TypeError) as exc:
            raise CorruptRecordError(f"bad session record: {exc}", path=str(path))

    def save_trace(self, session_id: str, trace: PipelineTrace) -> None:
        with self._lock_for(session_id):
            self._write_atomic(
                self._trace_path(session_id, trace.message_sequence),
                dump_record(trace.to_dict()),
            )

    def load_trace(self, session_id: str, sequence: int) -> PipelineTrace:
        path = self._trace_path(session_id, sequence)
        data = self._read_record(path)
        try:
            return PipelineTrace.from_dict(data)
        except (KeyError, ValueError, TypeError) as exc:
            raise CorruptRecordError(f"bad trace record: {exc}", path=str(path))

    def list_sessions(self, student_id: str | None = None) -> list[Session]:
        """All stored sessions, optionally filtered, ordered by creation time."""
        sessions = []
        for path in sorted((self._root / "sessions").glob("*.json")):
            session = self.load_session(path.stem)
            if student_id is None or session.student_id == student_id:
                sessions.append(session)
        sessions.sort(key=lambda s: (s.created_at, s.session_id))
        return sessions

    def list_traces(self, session_id: str) -> list[PipelineTrace]:
        """Stored traces for one session in message-sequence order."""
        directory = self._root / "traces" / session_id
        if not directory.is_dir():
            return []
        sequences = sorted(
            int(p.stem) for p in directory.glob("*.json") if p.stem.isdigit()
        )
        return [self.load_trace(session_id, seq) for seq in sequences]
