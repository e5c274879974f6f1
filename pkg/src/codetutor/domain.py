"""Core data model: sessions, messages, pipeline traces.

All values are immutable after construction and safe to share across
concurrent request handlers. Each type has a canonical JSON encoding
(lower_snake_case field names) used by persistence and the HTTP API;
``to_dict``/``from_dict`` pairs must round-trip exactly.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any

from .errors import (
    AlternationViolationError,
    EmptyContentError,
    SessionClosedError,
    UnknownExerciseError,
)


class Role(str, Enum):
    STUDENT = "student"
    TUTOR = "tutor"
    SYSTEM = "system"


class SessionState(str, Enum):
    ACTIVE = "active"
    CLOSED = "closed"


class Outcome(str, Enum):
    REJECTED_OFF_TOPIC = "rejected_off_topic"
    ANSWERED = "answered"
    FALLBACK = "fallback"


class AssistanceLevel(IntEnum):
    """Ordered ladder of hint concreteness: L3 > L2 > L1.

    L3 names the relevant construct, L2 gives a single subtle clue or
    counter-question, L1 only encourages re-reading the problem statement.
    Refinement moves downward only.
    """

    L1 = 1
    L2 = 2
    L3 = 3

    def lowered(self) -> "AssistanceLevel":
        """One step down the ladder; L1 is the floor."""
        return AssistanceLevel(max(self.value - 1, AssistanceLevel.L1.value))


class Violation(str, Enum):
    CODE_BLOCK = "code_block"
    PSEUDOCODE_OR_STEPS = "pseudocode_or_steps"
    SOLUTION_REVEAL = "solution_reveal"
    EMPTY_OR_GARBLED = "empty_or_garbled"


class VerdictSource(str, Enum):
    STATIC_SCAN = "static_scan"
    LLM_SELF_CHECK = "llm_self_check"
    BOTH = "both"


@dataclass(frozen=True)
class GuardrailVerdict:
    """Pass/fail judgment on a draft response."""

    passed: bool
    violations: frozenset[Violation]
    source: VerdictSource

    def __post_init__(self) -> None:
        if self.passed != (not self.violations):
            raise ValueError("passed must hold exactly when violations is empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "violations": sorted(v.value for v in self.violations),
            "source": self.source.value,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "GuardrailVerdict":
        return GuardrailVerdict(
            passed=data["passed"],
            violations=frozenset(Violation(v) for v in data["violations"]),
            source=VerdictSource(data["source"]),
        )


@dataclass(frozen=True)
class Message:
    role: Role
    content: str
    timestamp: datetime
    sequence: int

    def __post_init__(self) -> None:
        if not self.content.strip():
            raise EmptyContentError("message content is empty")
        if self.sequence < 0:
            raise ValueError("sequence must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "role": self.role.value,
            "content": self.content,
            "timestamp": self.timestamp.isoformat(),
            "sequence": self.sequence,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "Message":
        return Message(
            role=Role(data["role"]),
            content=data["content"],
            timestamp=datetime.fromisoformat(data["timestamp"]),
            sequence=data["sequence"],
        )


@dataclass(frozen=True)
class Session:
    """A multi-turn conversation bound to one exercise and one student.

    Append-only: mutation helpers return a new value. Ordering is defined
    by message sequence; timestamps are informational only.
    """

    session_id: str
    exercise_id: str
    student_id: str
    messages: tuple[Message, ...]
    created_at: datetime
    state: SessionState

    def next_sequence(self) -> int:
        if not self.messages:
            return 0
        return max(m.sequence for m in self.messages) + 1

    def last_non_system_role(self) -> Role | None:
        for message in reversed(self.messages):
            if message.role is not Role.SYSTEM:
                return message.role
        return None

    def recent_messages(self, limit: int) -> tuple[Message, ...]:
        """The last ``limit`` non-system messages, oldest first."""
        chat = [m for m in self.messages if m.role is not Role.SYSTEM]
        return tuple(chat[-limit:]) if limit > 0 else ()

    def closed(self) -> "Session":
        return replace(self, state=SessionState.CLOSED)

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "exercise_id": self.exercise_id,
            "student_id": self.student_id,
            "messages": [m.to_dict() for m in self.messages],
            "created_at": self.created_at.isoformat(),
            "state": self.state.value,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "Session":
        return Session(
            session_id=data["session_id"],
            exercise_id=data["exercise_id"],
            student_id=data["student_id"],
            messages=tuple(Message.from_dict(m) for m in data["messages"]),
            created_at=datetime.fromisoformat(data["created_at"]),
            state=SessionState(data["state"]),
        )


@dataclass(frozen=True)
class DraftRecord:
    """One generated draft with its guardrail verdict and assistance level."""

    text: str
    verdict: GuardrailVerdict
    level: AssistanceLevel

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "verdict": self.verdict.to_dict(),
            "level": self.level.name,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "DraftRecord":
        return DraftRecord(
            text=data["text"],
            verdict=GuardrailVerdict.from_dict(data["verdict"]),
            level=AssistanceLevel[data["level"]],
        )


@dataclass(frozen=True)
class LlmCallSummary:
    """Audit row for one backend call; completions themselves live in drafts."""

    step: str
    backend: str
    latency_ms: int
    prompt_chars: int
    completion_chars: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "backend": self.backend,
            "latency_ms": self.latency_ms,
            "prompt_chars": self.prompt_chars,
            "completion_chars": self.completion_chars,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "LlmCallSummary":
        return LlmCallSummary(
            step=data["step"],
            backend=data["backend"],
            latency_ms=data["latency_ms"],
            prompt_chars=data["prompt_chars"],
            completion_chars=data["completion_chars"],
        )


@dataclass(frozen=True)
class PipelineTrace:
    """Per-message audit record of every pipeline step.

    Structural invariants are enforced at construction; the gating law
    (gated iff relevance_score < threshold) is a pipeline property and is
    asserted by tests rather than baked in here, since the threshold is
    configurable.
    """

    message_sequence: int
    relevance_score: int | None
    gated: bool
    selected_files: tuple[str, ...]
    build_log_requested: bool
    drafts: tuple[DraftRecord, ...]
    refinement_count: int
    llm_calls: tuple[LlmCallSummary, ...]
    outcome: Outcome
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.relevance_score is not None and not 1 <= self.relevance_score <= 10:
            raise ValueError("relevance_score out of range")
        if self.gated and (self.selected_files or self.drafts):
            raise ValueError("a gated trace must have no selections or drafts")
        if self.refinement_count != max(0, len(self.drafts) - 1):
            raise ValueError("refinement_count must equal max(0, len(drafts) - 1)")
        if self.outcome is Outcome.ANSWERED:
            if not self.drafts or not self.drafts[-1].verdict.passed:
                raise ValueError("answered requires a passing final draft")

    def to_dict(self) -> dict[str, Any]:
        return {
            "message_sequence": self.message_sequence,
            "relevance_score": self.relevance_score,
            "gated": self.gated,
            "selected_files": list(self.selected_files),
            "build_log_requested": self.build_log_requested,
            "drafts": [d.to_dict() for d in self.drafts],
            "refinement_count": self.refinement_count,
            "llm_calls": [c.to_dict() for c in self.llm_calls],
            "outcome": self.outcome.value,
            "warnings": list(self.warnings),
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "PipelineTrace":
        return PipelineTrace(
            message_sequence=data["message_sequence"],
            relevance_score=data["relevance_score"],
            gated=data["gated"],
            selected_files=tuple(data["selected_files"]),
            build_log_requested=data["build_log_requested"],
            drafts=tuple(DraftRecord.from_dict(d) for d in data["drafts"]),
            refinement_count=data["refinement_count"],
            llm_calls=tuple(LlmCallSummary.from_dict(c) for c in data["llm_calls"]),
            outcome=Outcome(data["outcome"]),
            warnings=tuple(data.get("warnings", ())),
        )


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def create_session(
    exercise_id: str,
    student_id: str,
    fixtures_dir: Path | None = None,
) -> Session:
    """Create a fresh active session.

    When ``fixtures_dir`` is given, the exercise fixture directory must
    exist; raises UnknownExerciseError otherwise.
    """
    if fixtures_dir is not None and not (fixtures_dir / exercise_id).is_dir():
        raise UnknownExerciseError(f"no exercise fixture named {exercise_id!r}")
    return Session(
        session_id=uuid.uuid4().hex,
        exercise_id=exercise_id,
        student_id=student_id,
        messages=(),
        created_at=utcnow(),
        state=SessionState.ACTIVE,
    )


def append_message(
    session: Session,
    role: Role,
    content: str,
    timestamp: datetime | None = None,
) -> Session:
    """Return a new session with one message appended.

    Enforces role alternation (ignoring system messages) and gapless,
    strictly increasing sequences starting at 0.
    """
    if session.state is not SessionState.ACTIVE:
        raise SessionClosedError(f"session {session.session_id} is closed")
    if not content.strip():
        raise EmptyContentError("message content is empty")
    if role is not Role.SYSTEM and session.last_non_system_role() is role:
        raise AlternationViolationError(
            f"two consecutive {role.value} messages are not allowed"
        )
    message = Message(
        role=role,
        content=content,
        timestamp=utcnow() if timestamp is None else timestamp,
        sequence=session.next_sequence(),
    )
    return replace(session, messages=session.messages + (message,))
