"""Shared test helpers: scripted backends and small builders."""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

from codetutor.domain import Role, Session, SessionState, append_message
from codetutor.guardrails import GuardrailEngine, PromptTemplates
from codetutor.llm import MockBackend, MockScript, MockScriptEntry, StepTag
from codetutor.pipeline import Pipeline

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
BUBBLESORT = FIXTURES / "bubblesort"

FIXED_TIME = datetime(2024, 5, 2, 12, 0, 0, tzinfo=timezone.utc)


def scripted(*entries) -> MockBackend:
    """Build a MockBackend from (step, reply) or (step, substring, reply)."""
    built = []
    for entry in entries:
        if len(entry) == 2:
            step, reply = entry
            substring = None
        else:
            step, substring, reply = entry
        built.append(
            MockScriptEntry(
                expect_step=StepTag(step), expect_substring=substring, reply=reply
            )
        )
    return MockBackend(MockScript(built))


def make_pipeline(backend, templates: PromptTemplates, **kwargs) -> Pipeline:
    engine = GuardrailEngine(backend)
    return Pipeline(backend, templates, engine, **kwargs)


def make_session(
    exercise_id: str = "bubblesort",
    student_id: str = "s1",
    turns: tuple[tuple[str, str], ...] = (),
) -> Session:
    """An in-memory session, optionally pre-filled with (student, tutor)
    message pairs."""
    session = Session(
        session_id="t-session",
        exercise_id=exercise_id,
        student_id=student_id,
        messages=(),
        created_at=FIXED_TIME,
        state=SessionState.ACTIVE,
    )
    for student, tutor in turns:
        session = append_message(session, Role.STUDENT, student)
        session = append_message(session, Role.TUTOR, tutor)
    return session
