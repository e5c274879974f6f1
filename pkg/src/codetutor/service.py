"""Session-facing application service.

Owns everything the HTTP layer and CLI share: fixture loading and
caching, the per-session busy locks that serialise message handling, and
the persistence of sessions and traces around each pipeline run.
"""

from __future__ import annotations

import threading
from dataclasses import replace
from pathlib import Path

from .context import ExerciseFixture, load_fixture
from .domain import (
    Message,
    Outcome,
    PipelineTrace,
    Role,
    Session,
    SessionState,
    append_message,
    create_session,
    utcnow,
)
from .errors import (
    AlternationViolationError,
    BackendUnavailableError,
    EmptyContentError,
    MissingProblemStatementError,
    SessionBusyError,
    SessionClosedError,
    UnknownExerciseError,
    UnreadableRootError,
)
from .guardrails import FALLBACK_TEMPLATE, GuardrailEngine
from .pipeline import UNAVAILABLE_TEMPLATE, Pipeline
from .store import SessionStore


class TutorService:
    def __init__(
        self,
        pipeline: Pipeline,
        guardrails: GuardrailEngine,
        store: SessionStore,
        fixtures_dir: str | Path,
    ):
        self._pipeline = pipeline
        self._guardrails = guardrails
        self._store = store
        self._fixtures_dir = Path(fixtures_dir)
        self._fixtures: dict[str, ExerciseFixture] = {}
        self._fixtures_guard = threading.Lock()
        self._busy: dict[str, threading.Lock] = {}
        self._busy_guard = threading.Lock()

    @property
    def store(self) -> SessionStore:
        return self._store

    def _busy_for(self, session_id: str) -> threading.Lock:
        with self._busy_guard:
            return self._busy.setdefault(session_id, threading.Lock())

    def fixture(self, exercise_id: str) -> ExerciseFixture:
        """Load an exercise fixture once and share it read-only.

        A directory that is missing or has no problem statement is not a
        servable exercise, so both load failures surface as unknown.
        """
        with self._fixtures_guard:
            cached = self._fixtures.get(exercise_id)
            if cached is not None:
                return cached
        root = self._fixtures_dir / exercise_id
        try:
            fixture = load_fixture(root)
        except (UnreadableRootError, MissingProblemStatementError) as exc:
            raise UnknownExerciseError(f"no exercise {exercise_id!r}: {exc}")
        with self._fixtures_guard:
            return self._fixtures.setdefault(exercise_id, fixture)

    def list_exercises(self) -> list[dict[str, str]]:
        """Servable exercises under the fixtures directory, sorted by id."""
        listing = []
        if not self._fixtures_dir.is_dir():
            return listing
        for child in sorted(self._fixtures_dir.iterdir()):
            if not child.is_dir():
                continue
            try:
                fixture = self.fixture(child.name)
            except UnknownExerciseError:
                continue
            listing.append({"exercise_id": child.name, "title": fixture.title})
        return listing

    def create_session(self, exercise_id: str, student_id: str) -> Session:
        fixture = self.fixture(exercise_id)
        session = create_session(fixture.exercise_id, student_id)
        self._store.save_session(session)
        return session

    def get_session(self, session_id: str) -> Session:
        return self._store.load_session(session_id)

    def get_trace(self, session_id: str, sequence: int) -> PipelineTrace:
        self._store.load_session(session_id)
        return self._store.load_trace(session_id, sequence)

    def handle_message(
        self, session_id: str, content: str
    ) -> tuple[Message, Outcome]:
        """Run one student message through the pipeline and persist.

        On backend failure the trace is stored but the student message is
        not, so a retry does not trip the alternation rule; the caller
        sees backend_unavailable.
        """
        lock = self._busy_for(session_id)
        if not lock.acquire(blocking=False):
            raise SessionBusyError(
                f"session {session_id} is already handling a message"
            )
        try:
            session = self._store.load_session(session_id)
            if session.state is not SessionState.ACTIVE:
                raise SessionClosedError(f"session {session_id} is closed")
            if not content.strip():
                raise EmptyContentError("message content is empty")
            if session.last_non_system_role() is Role.STUDENT:
                raise AlternationViolationError(
                    "student message is already awaiting a reply"
                )

            fixture = self.fixture(session.exercise_id)
            result = self._pipeline.handle_message(session, fixture, content)
            if result.backend_error is not None:
                self._store.save_trace(session_id, result.trace)
                raise BackendUnavailableError(UNAVAILABLE_TEMPLATE)

            reply, trace = result.reply, result.trace
            if (
                trace.outcome is Outcome.ANSWERED
                and not self._guardrails.static_scan(reply).passed
            ):
                reply = FALLBACK_TEMPLATE
                trace = replace(
                    trace,
                    outcome=Outcome.FALLBACK,
                    warnings=trace.warnings
                    + ("boundary static scan rejected the final draft",),
                )

            now = utcnow()
            session = append_message(session, Role.STUDENT, content, timestamp=now)
            session = append_message(session, Role.TUTOR, reply, timestamp=now)
            self._store.save_session(session)
            self._store.save_trace(session_id, trace)
            return session.messages[-1], trace.outcome
        finally:
            lock.release()
