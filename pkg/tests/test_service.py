import threading

import pytest

from codetutor.domain import (
    AssistanceLevel,
    DraftRecord,
    GuardrailVerdict,
    Outcome,
    PipelineTrace,
    Role,
    VerdictSource,
)
from codetutor.errors import (
    AlternationViolationError,
    BackendUnavailableError,
    EmptyContentError,
    NotFoundError,
    SessionBusyError,
    SessionClosedError,
    UnknownExerciseError,
)
from codetutor.guardrails import FALLBACK_TEMPLATE, GuardrailEngine, PromptTemplates
from codetutor.pipeline import Pipeline, PipelineResult
from codetutor.service import TutorService
from codetutor.store import SessionStore

from helpers import FIXTURES, scripted


def make_service(backend, tmp_path, fixtures_dir=FIXTURES) -> TutorService:
    templates = PromptTemplates.load()
    guardrails = GuardrailEngine(backend)
    pipeline = Pipeline(backend, templates, guardrails)
    store = SessionStore(tmp_path / "data")
    return TutorService(pipeline, guardrails, store, fixtures_dir)


HAPPY = (
    ("relevance", "7"),
    ("file_selection", "src/sort.py"),
    ("generation", "Look at the largest index your inner loop can reach."),
    ("self_check", "PASS"),
)


def test_create_get_and_list(tmp_path):
    service = make_service(scripted(), tmp_path)
    session = service.create_session("bubblesort", "alice")
    assert service.get_session(session.session_id) == session
    assert service.list_exercises() == [
        {"exercise_id": "bubblesort", "title": "Bubble sort"}
    ]
    with pytest.raises(UnknownExerciseError):
        service.create_session("no-such", "alice")
    with pytest.raises(NotFoundError):
        service.get_session("missing")


def test_list_exercises_skips_broken_fixture(tmp_path):
    root = tmp_path / "fixtures"
    (root / "good").mkdir(parents=True)
    (root / "good" / "problem.md").write_text("# Good one\n", encoding="utf-8")
    (root / "broken").mkdir()
    (root / "stray.txt").write_text("not a directory fixture", encoding="utf-8")

    service = make_service(scripted(), tmp_path, fixtures_dir=root)
    assert service.list_exercises() == [
        {"exercise_id": "good", "title": "Good one"}
    ]


def test_handle_message_persists_messages_and_trace(tmp_path):
    service = make_service(scripted(*HAPPY), tmp_path)
    session = service.create_session("bubblesort", "alice")

    tutor_message, outcome = service.handle_message(
        session.session_id, "how do I start?"
    )
    assert outcome is Outcome.ANSWERED
    assert tutor_message.role is Role.TUTOR
    assert tutor_message.sequence == 1

    stored = service.get_session(session.session_id)
    assert [m.role for m in stored.messages] == [Role.STUDENT, Role.TUTOR]
    assert stored.messages[0].content == "how do I start?"
    assert stored.messages[1].content == tutor_message.content

    trace = service.get_trace(session.session_id, 0)
    assert trace.outcome is Outcome.ANSWERED
    assert trace.message_sequence == 0


def test_handle_message_validates_input(tmp_path):
    service = make_service(scripted(*HAPPY), tmp_path)
    session = service.create_session("bubblesort", "alice")
    with pytest.raises(EmptyContentError):
        service.handle_message(session.session_id, "   ")
    with pytest.raises(NotFoundError):
        service.handle_message("ghost", "hello")


def test_handle_message_rejects_closed_session(tmp_path):
    service = make_service(scripted(*HAPPY), tmp_path)
    session = service.create_session("bubblesort", "alice")
    service.store.save_session(session.closed())
    with pytest.raises(SessionClosedError):
        service.handle_message(session.session_id, "hello")


def test_handle_message_guards_alternation(tmp_path):
    from codetutor.domain import append_message

    service = make_service(scripted(*HAPPY), tmp_path)
    session = service.create_session("bubblesort", "alice")
    dangling = append_message(session, Role.STUDENT, "never answered")
    service.store.save_session(dangling)
    with pytest.raises(AlternationViolationError):
        service.handle_message(session.session_id, "another question")


def test_backend_failure_rolls_back_but_stores_trace(tmp_path):
    service = make_service(scripted(("relevance", "8")), tmp_path)
    session = service.create_session("bubblesort", "alice")

    with pytest.raises(BackendUnavailableError):
        service.handle_message(session.session_id, "how do I start?")

    stored = service.get_session(session.session_id)
    assert stored.messages == ()
    trace = service.get_trace(session.session_id, 0)
    assert trace.outcome is Outcome.FALLBACK
    assert any("mock_exhausted" in w for w in trace.warnings)


class BlockingBackend:
    """Wraps a backend; the first call parks until released."""

    name = "mock"

    def __init__(self, inner):
        self.inner = inner
        self.entered = threading.Event()
        self.release = threading.Event()
        self._first = True

    def complete(self, prompt):
        if self._first:
            self._first = False
            self.entered.set()
            assert self.release.wait(timeout=5)
        return self.inner.complete(prompt)


def test_second_message_while_busy_is_rejected(tmp_path):
    backend = BlockingBackend(scripted(*HAPPY))
    service = make_service(backend, tmp_path)
    session = service.create_session("bubblesort", "alice")
    results = {}

    def first_post():
        results["first"] = service.handle_message(
            session.session_id, "how do I start?"
        )

    worker = threading.Thread(target=first_post)
    worker.start()
    assert backend.entered.wait(timeout=5)
    try:
        with pytest.raises(SessionBusyError):
            service.handle_message(session.session_id, "me too")
    finally:
        backend.release.set()
        worker.join(timeout=5)

    _, outcome = results["first"]
    assert outcome is Outcome.ANSWERED
    assert len(service.get_session(session.session_id).messages) == 2


class StubPipeline:
    def __init__(self, result):
        self._result = result

    def handle_message(self, session, fixture, latest_content):
        return self._result


def test_boundary_rescan_degrades_leaky_answer(tmp_path):
    leaky_reply = "Full solution:\n```python\nreturn sorted(items)\n```"
    passing_draft = DraftRecord(
        text="claimed-clean draft",
        verdict=GuardrailVerdict(
            passed=True, violations=frozenset(), source=VerdictSource.BOTH
        ),
        level=AssistanceLevel.L3,
    )
    inconsistent = PipelineResult(
        reply=leaky_reply,
        trace=PipelineTrace(
            message_sequence=0,
            relevance_score=9,
            gated=False,
            selected_files=(),
            build_log_requested=False,
            drafts=(passing_draft,),
            refinement_count=0,
            llm_calls=(),
            outcome=Outcome.ANSWERED,
        ),
    )
    backend = scripted()
    service = make_service(backend, tmp_path)
    session = service.create_session("bubblesort", "alice")
    service._pipeline = StubPipeline(inconsistent)

    tutor_message, outcome = service.handle_message(session.session_id, "solve it")
    assert outcome is Outcome.FALLBACK
    assert tutor_message.content == FALLBACK_TEMPLATE

    trace = service.get_trace(session.session_id, 0)
    assert trace.outcome is Outcome.FALLBACK
    assert any("boundary static scan" in w for w in trace.warnings)
