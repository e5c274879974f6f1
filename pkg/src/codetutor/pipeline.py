"""Four-step tutoring pipeline.

Per student message: (1) score the question's relevance on a 1-10 scale
and reject below the threshold before spending any further model calls,
(2) let the model pick repository files by name from a listing, (3)
generate a hint grounded in the assembled context, (4) run the guardrail
self-check and refine at decreasing assistance levels until a draft is
safe to send.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .context import (
    ContextBundle,
    ExerciseFixture,
    RepositorySnapshot,
    assemble_context,
    render_file_listing,
)
from .domain import (
    AssistanceLevel,
    DraftRecord,
    LlmCallSummary,
    Message,
    Outcome,
    PipelineTrace,
    Role,
    Session,
)
from .errors import BackendError
from .guardrails import GuardrailEngine, PromptTemplates
from .llm import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURES,
    ChatBackend,
    ChatPrompt,
    LlmExchange,
    StepTag,
    build_prompt,
)

REJECTION_TEMPLATE = (
    "Your question seems to be off-topic for this exercise. "
    "Please rephrase it and focus on the programming task at hand."
)
UNAVAILABLE_TEMPLATE = "The tutor is temporarily unavailable"

RETRY_INSTRUCTION = "Answer with a single integer from 1 to 10 and nothing else."

DEFAULT_RELEVANCE_THRESHOLD = 5
DEFAULT_MAX_REFINEMENTS = 3
RELEVANCE_HISTORY_WINDOW = 6
GENERATION_HISTORY_WINDOW = 10
MAX_SELECTED_FILES = 5
FAIL_OPEN_SCORE = 5

_INT_RE = re.compile(r"\d+")

_RELEVANCE_RULES = (
    "You judge whether a student's chat message belongs in a tutoring "
    "conversation about one programming exercise.\n"
    "Rate the relevance of the question below to the exercise on a scale "
    "from 1 (completely off-topic) to 10 (directly about the exercise).\n"
    "Answer with a single integer from 1 to 10."
)
_SELECTION_RULES = (
    "You pick which files from a student's exercise repository are worth "
    "reading to answer their question.\n"
    "Reply with the chosen items only, one per line, copied exactly from "
    "the list. Choose at most 5. You may also include the line BUILD_LOG "
    "if it appears in the list and the build output seems relevant."
)


@dataclass(frozen=True)
class RelevanceScore:
    value: int
    raw_completion: str

    def __post_init__(self) -> None:
        if not 1 <= self.value <= 10:
            raise ValueError("relevance value out of range [1, 10]")


@dataclass(frozen=True)
class FileSelection:
    requested: tuple[str, ...]
    accepted: tuple[str, ...]
    include_build_log: bool
    dropped: tuple[str, ...]


class GateDecision:
    PROCEED = "proceed"
    REJECT = "reject"


@dataclass
class TraceBuilder:
    """Mutable per-message collector that becomes an immutable trace."""

    message_sequence: int
    relevance_score: int | None = None
    gated: bool = False
    selected_files: tuple[str, ...] = ()
    build_log_requested: bool = False
    drafts: tuple[DraftRecord, ...] = ()
    llm_calls: list[LlmCallSummary] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def record(self, exchange: LlmExchange) -> None:
        self.llm_calls.append(
            LlmCallSummary(
                step=exchange.prompt.step_tag.value,
                backend=exchange.backend,
                latency_ms=exchange.latency_ms,
                prompt_chars=len(exchange.prompt.rendered()),
                completion_chars=len(exchange.completion),
            )
        )

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def build(self, outcome: Outcome) -> PipelineTrace:
        return PipelineTrace(
            message_sequence=self.message_sequence,
            relevance_score=self.relevance_score,
            gated=self.gated,
            selected_files=self.selected_files,
            build_log_requested=self.build_log_requested,
            drafts=self.drafts,
            refinement_count=max(0, len(self.drafts) - 1),
            llm_calls=tuple(self.llm_calls),
            outcome=outcome,
            warnings=tuple(self.warnings),
        )


def parse_relevance(completion: str) -> int | None:
    """First integer in [1, 10] scanning left to right, else None."""
    for token in _INT_RE.findall(completion):
        value = int(token)
        if 1 <= value <= 10:
            return value
    return None


def gate(
    score: RelevanceScore, threshold: int = DEFAULT_RELEVANCE_THRESHOLD
) -> str:
    """Reject exactly when the score falls below the threshold."""
    return GateDecision.REJECT if score.value < threshold else GateDecision.PROCEED


def render_history(messages: tuple[Message, ...]) -> str:
    if not messages:
        return "(no previous messages)"
    return "\n".join(f"{m.role.value}: {m.content}" for m in messages)


@dataclass(frozen=True)
class PipelineResult:
    reply: str
    trace: PipelineTrace
    backend_error: str | None = None


class Pipeline:
    """Stateless orchestrator; safe to share across concurrent sessions."""

    def __init__(
        self,
        backend: ChatBackend,
        templates: PromptTemplates,
        guardrails: GuardrailEngine,
        relevance_threshold: int = DEFAULT_RELEVANCE_THRESHOLD,
        max_refinements: int = DEFAULT_MAX_REFINEMENTS,
        context_budget: int = 24_000,
    ):
        self._backend = backend
        self._templates = templates
        self._guardrails = guardrails
        self._threshold = relevance_threshold
        self._max_refinements = max_refinements
        self._context_budget = context_budget

    def assess_relevance(
        self,
        history: tuple[Message, ...],
        latest: Message,
        exercise_title: str,
        trace: TraceBuilder | None = None,
    ) -> RelevanceScore:
        """One relevance-scoring call, with one reworded retry on parse
        failure; a second failure fails open at score 5."""
        trace = trace or TraceBuilder(message_sequence=latest.sequence)
        user = (
            f"Exercise: {exercise_title}\n\n"
            f"Recent conversation:\n{render_history(history[-RELEVANCE_HISTORY_WINDOW:])}\n\n"
            f"Question:\n{latest.content}"
        )
        exchange = self._backend.complete(
            build_prompt(StepTag.RELEVANCE, _RELEVANCE_RULES, user)
        )
        trace.record(exchange)
        value = parse_relevance(exchange.completion)
        if value is not None:
            return RelevanceScore(value=value, raw_completion=exchange.completion)

        retry = self._backend.complete(
            build_prompt(
                StepTag.RELEVANCE, _RELEVANCE_RULES, f"{user}\n{RETRY_INSTRUCTION}"
            )
        )
        trace.record(retry)
        value = parse_relevance(retry.completion)
        if value is not None:
            return RelevanceScore(value=value, raw_completion=retry.completion)

        trace.warn("relevance score unparseable twice, failing open at 5")
        return RelevanceScore(value=FAIL_OPEN_SCORE, raw_completion=retry.completion)

    def select_files(
        self,
        snapshot: RepositorySnapshot,
        build_log_available: bool,
        history: tuple[Message, ...],
        latest: Message,
        trace: TraceBuilder | None = None,
    ) -> FileSelection:
        """One file-selection call; only exact path matches are accepted,
        anything hallucinated is dropped."""
        trace = trace or TraceBuilder(message_sequence=latest.sequence)
        listing = render_file_listing(snapshot, build_log_available)
        user = (
            f"Files:\n{listing if listing else '(repository is empty)'}\n\n"
            f"Recent conversation:\n{render_history(history[-RELEVANCE_HISTORY_WINDOW:])}\n\n"
            f"Question:\n{latest.content}"
        )
        exchange = self._backend.complete(
            build_prompt(StepTag.FILE_SELECTION, _SELECTION_RULES, user)
        )
        trace.record(exchange)

        requested: list[str] = []
        accepted: list[str] = []
        dropped: list[str] = []
        include_build_log = False
        for raw_line in exchange.completion.splitlines():
            line = raw_line.strip()
            if not line:
                continue
            requested.append(line)
            if line == "BUILD_LOG":
                if build_log_available:
                    include_build_log = True
                elif line not in dropped:
                    dropped.append(line)
            elif line in snapshot.files:
                if line not in accepted and len(accepted) < MAX_SELECTED_FILES:
                    accepted.append(line)
            elif line not in dropped:
                dropped.append(line)
        return FileSelection(
            requested=tuple(requested),
            accepted=tuple(accepted),
            include_build_log=include_build_log,
            dropped=tuple(dropped),
        )

    def generate_response(
        self,
        bundle: ContextBundle,
        history: tuple[Message, ...],
        latest: Message,
        level: AssistanceLevel,
        trace: TraceBuilder | None = None,
    ) -> str:
        """One generation call under the tutor-role system prompt; the raw
        draft is returned, filtering is the self-check's job."""
        trace = trace or TraceBuilder(message_sequence=latest.sequence)
        system = self._templates.render_system_prompt(level)
        user = self._templates.render_generation_user(
            context_bundle=bundle.render(),
            history=render_history(history[-GENERATION_HISTORY_WINDOW:]),
            question=latest.content,
        )
        prompt = ChatPrompt(
            step_tag=StepTag.GENERATION,
            messages=(("system", system), ("user", user)),
            temperature=DEFAULT_TEMPERATURES[StepTag.GENERATION],
            max_tokens=DEFAULT_MAX_TOKENS,
        )
        exchange = self._backend.complete(prompt)
        trace.record(exchange)
        return exchange.completion

    def handle_message(
        self, session: Session, fixture: ExerciseFixture, latest_content: str
    ) -> PipelineResult:
        """Run the full chain for one student message.

        The session holds the history; the latest question is passed
        separately and is not yet part of the session. On backend failure
        the partial trace survives and the result carries the error code.
        """
        history = session.recent_messages(GENERATION_HISTORY_WINDOW)
        latest = Message(
            role=Role.STUDENT,
            content=latest_content,
            timestamp=session.created_at,
            sequence=session.next_sequence(),
        )
        trace = TraceBuilder(message_sequence=latest.sequence)
        try:
            score = self.assess_relevance(history, latest, fixture.title, trace)
            trace.relevance_score = score.value
            if gate(score, self._threshold) == GateDecision.REJECT:
                trace.gated = True
                return PipelineResult(
                    reply=REJECTION_TEMPLATE,
                    trace=trace.build(Outcome.REJECTED_OFF_TOPIC),
                )

            selection = self.select_files(
                fixture.repository,
                build_log_available=fixture.build_log is not None,
                history=history,
                latest=latest,
                trace=trace,
            )
            trace.selected_files = selection.accepted
            trace.build_log_requested = selection.include_build_log
            bundle = assemble_context(
                fixture,
                list(selection.accepted),
                selection.include_build_log,
                self._context_budget,
            )

            def generate(level: AssistanceLevel) -> str:
                return self.generate_response(bundle, history, latest, level, trace)

            reply, drafts, outcome = self._guardrails.refine_until_safe(
                generate,
                initial_level=AssistanceLevel.L3,
                max_refinements=self._max_refinements,
                recorder=trace,
            )
            trace.drafts = drafts
            return PipelineResult(reply=reply, trace=trace.build(outcome))
        except BackendError as exc:
            trace.warn(f"backend failure: {exc.code}")
            return PipelineResult(
                reply=UNAVAILABLE_TEMPLATE,
                trace=trace.build(Outcome.FALLBACK),
                backend_error=exc.code,
            )
