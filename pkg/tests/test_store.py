import dataclasses
import os

import pytest

from codetutor.domain import (
    AssistanceLevel,
    DraftRecord,
    GuardrailVerdict,
    Outcome,
    PipelineTrace,
    VerdictSource,
)
from codetutor.errors import CorruptRecordError, IoError, NotFoundError
from codetutor.store import SessionStore

from helpers import make_session


def _trace(sequence=0):
    draft = DraftRecord(
        text="A hint about loop bounds.",
        verdict=GuardrailVerdict(
            passed=True, violations=frozenset(), source=VerdictSource.BOTH
        ),
        level=AssistanceLevel.L3,
    )
    return PipelineTrace(
        message_sequence=sequence,
        relevance_score=7,
        gated=False,
        selected_files=("src/sort.py",),
        build_log_requested=False,
        drafts=(draft,),
        refinement_count=0,
        llm_calls=(),
        outcome=Outcome.ANSWERED,
        warnings=(),
    )


def test_session_round_trip(tmp_path):
    store = SessionStore(tmp_path)
    session = make_session(turns=(("q", "a"),))
    store.save_session(session)
    assert store.load_session(session.session_id) == session


def test_trace_round_trip(tmp_path):
    store = SessionStore(tmp_path)
    trace = _trace(sequence=4)
    store.save_trace("s1", trace)
    assert store.load_trace("s1", 4) == trace


def test_load_unknown_session(tmp_path):
    store = SessionStore(tmp_path)
    with pytest.raises(NotFoundError):
        store.load_session("nope")
    with pytest.raises(NotFoundError):
        store.load_trace("nope", 0)


def test_truncated_record_is_corrupt(tmp_path):
    store = SessionStore(tmp_path)
    session = make_session()
    store.save_session(session)
    path = tmp_path / "sessions" / f"{session.session_id}.json"
    path.write_bytes(path.read_bytes()[:10])

    with pytest.raises(CorruptRecordError) as exc_info:
        store.load_session(session.session_id)
    assert str(path) in str(exc_info.value)
    assert exc_info.value.path == str(path)


def test_wrong_shape_record_is_corrupt(tmp_path):
    store = SessionStore(tmp_path)
    path = tmp_path / "sessions" / "weird.json"
    path.write_text("[1, 2, 3]", encoding="utf-8")
    with pytest.raises(CorruptRecordError):
        store.load_session("weird")

    path.write_text('{"session_id": "weird"}', encoding="utf-8")
    with pytest.raises(CorruptRecordError):
        store.load_session("weird")


def test_interrupted_save_keeps_old_record(tmp_path, monkeypatch):
    store = SessionStore(tmp_path)
    session = make_session(turns=(("q1", "a1"),))
    store.save_session(session)

    grown = make_session(turns=(("q1", "a1"), ("q2", "a2")))

    def explode(src, dst):
        raise OSError("simulated crash at the rename seam")

    monkeypatch.setattr(os, "replace", explode)
    with pytest.raises(IoError):
        store.save_session(grown)
    monkeypatch.undo()

    assert store.load_session(session.session_id) == session
    leftovers = list((tmp_path / "sessions").glob("*.tmp"))
    assert leftovers == []


def test_save_overwrites_atomically(tmp_path):
    store = SessionStore(tmp_path)
    first = make_session(turns=(("q1", "a1"),))
    store.save_session(first)
    second = make_session(turns=(("q1", "a1"), ("q2", "a2")))
    store.save_session(second)
    assert store.load_session(first.session_id) == second


def test_list_sessions_filters_by_student(tmp_path):
    store = SessionStore(tmp_path)
    alice = make_session(student_id="alice")
    bob_session = dataclasses.replace(
        make_session(student_id="bob"), session_id="other"
    )
    store.save_session(alice)
    store.save_session(bob_session)

    everyone = store.list_sessions()
    assert {s.student_id for s in everyone} == {"alice", "bob"}
    assert [s.student_id for s in store.list_sessions("bob")] == ["bob"]
    assert store.list_sessions("carol") == []


def test_list_traces_in_sequence_order(tmp_path):
    store = SessionStore(tmp_path)
    for seq in (4, 0, 2):
        store.save_trace("s1", _trace(sequence=seq))
    traces = store.list_traces("s1")
    assert [t.message_sequence for t in traces] == [0, 2, 4]
    assert store.list_traces("unknown") == []
