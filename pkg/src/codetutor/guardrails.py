"""Tutor-role prompt templates, the static solution-leak scanner, and the
self-check refinement loop.

The static scanner runs before every model-based self-check: it is free,
deterministic, and catches the dominant failure mode (drafts that contain
code) without any model in the loop. A draft reaches the student only if
both checks pass; otherwise the assistance level is lowered and the draft
regenerated, down to a fixed fallback message.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

from .domain import (
    AssistanceLevel,
    DraftRecord,
    GuardrailVerdict,
    Outcome,
    VerdictSource,
    Violation,
)
from .errors import InvalidTemplateError
from .llm import ChatBackend, LlmExchange, StepTag, build_prompt

FALLBACK_TEMPLATE = (
    "I can't phrase a good hint right now without giving too much away. "
    "Try re-reading the problem statement, and ask me a more specific "
    "question or contact a human tutor."
)

LEVEL_DIRECTIVES = {
    AssistanceLevel.L3: "You may name the relevant concept or API area.",
    AssistanceLevel.L2: "Give exactly one subtle clue or one counter-question.",
    AssistanceLevel.L1: (
        "Encourage re-reading the problem statement; "
        "do not mention implementation specifics."
    ),
}

# Leading tokens that mark a line as code-like; overridable via config so
# the scanner can follow the languages a course actually uses.
DEFAULT_CODE_KEYWORDS = (
    "for",
    "while",
    "if(",
    "def",
    "class",
    "public",
    "return",
    "import",
    "#include",
)

CODE_LINE_RUN = 3
NUMBERED_STEP_LINES = 4
MIN_DRAFT_CHARS = 10

REQUIRED_RULE_FRAGMENTS = (
    "You are an excellent tutor.",
    "never under any circumstances responds with code, pseudocode,",
    "a single subtle clue, a counter-question, or best practice",
    'say "Sorry, I don\'t know" and tell the student to ask a human tutor',
)
REQUIRED_REFUSAL = "Sorry, but I cannot provide a complete solution."

_NUMBERED_STEP_RE = re.compile(r"^\s*(\d+\.|Step\s+\d+)")
_SELF_CHECK_RULES = (
    "You review a draft reply that a programming tutor wants to send to a "
    "student. The tutor must never reveal solutions: no code, no pseudocode, "
    "no step-by-step implementation instructions. A good reply offers a "
    "single subtle clue, a counter-question, or a best practice.\n"
    "Answer whether the draft conforms to these rules. The first line of "
    'your answer must be exactly "PASS" or "FAIL".'
)


def _is_code_line(line: str, keywords: tuple[str, ...]) -> bool:
    stripped = line.strip()
    if not stripped:
        return False
    if stripped.endswith((";", "{", "}")):
        return True
    return any(stripped.startswith(kw) for kw in keywords)


def static_scan(
    draft: str, code_keywords: tuple[str, ...] = DEFAULT_CODE_KEYWORDS
) -> GuardrailVerdict:
    """Deterministic leak scan over one draft.

    Flags fenced blocks or runs of 3+ code-looking lines as code_block,
    4+ numbered-step lines as pseudocode_or_steps, and drafts shorter
    than 10 characters as empty_or_garbled.
    """
    violations: set[Violation] = set()
    if len(draft.strip()) < MIN_DRAFT_CHARS:
        violations.add(Violation.EMPTY_OR_GARBLED)

    lines = draft.splitlines()
    if "```" in draft:
        violations.add(Violation.CODE_BLOCK)
    else:
        run = 0
        for line in lines:
            run = run + 1 if _is_code_line(line, code_keywords) else 0
            if run >= CODE_LINE_RUN:
                violations.add(Violation.CODE_BLOCK)
                break

    step_lines = sum(1 for line in lines if _NUMBERED_STEP_RE.match(line))
    if step_lines >= NUMBERED_STEP_LINES:
        violations.add(Violation.PSEUDOCODE_OR_STEPS)

    return GuardrailVerdict(
        passed=not violations,
        violations=frozenset(violations),
        source=VerdictSource.STATIC_SCAN,
    )


@dataclass(frozen=True)
class PromptTemplates:
    """The tutor-role system template and generation user template.

    Loaded from plain-text files; the packaged defaults can be overridden
    by pointing TEMPLATE_DIR at a directory with the same file names
    (tutor_system.txt, generation_user.txt, few_shots.json). Overrides
    must still carry the tutor rules and the refusal few-shot.
    """

    system_template: str
    generation_user_template: str
    few_shots: tuple[tuple[str, str], ...]
    level_directives: dict[AssistanceLevel, str]

    @classmethod
    def load(cls, template_dir: Path | None = None) -> "PromptTemplates":
        directory = template_dir or Path(__file__).parent / "templates"
        try:
            system_template = (directory / "tutor_system.txt").read_text(
                encoding="utf-8"
            )
            user_template = (directory / "generation_user.txt").read_text(
                encoding="utf-8"
            )
            shots_raw = json.loads(
                (directory / "few_shots.json").read_text(encoding="utf-8")
            )
        except OSError as exc:
            raise InvalidTemplateError(f"cannot load templates from {directory}: {exc}")
        except ValueError as exc:
            raise InvalidTemplateError(f"invalid few_shots.json in {directory}: {exc}")
        templates = cls(
            system_template=system_template,
            generation_user_template=user_template,
            few_shots=tuple((s["student"], s["tutor"]) for s in shots_raw),
            level_directives=dict(LEVEL_DIRECTIVES),
        )
        templates.validate()
        return templates

    def validate(self) -> None:
        for fragment in REQUIRED_RULE_FRAGMENTS:
            if fragment not in self.system_template:
                raise InvalidTemplateError(
                    f"system template is missing the rule {fragment!r}"
                )
        if not any(REQUIRED_REFUSAL in answer for _, answer in self.few_shots):
            raise InvalidTemplateError(
                "few_shots must include the solution-request refusal example"
            )
        for placeholder in ("{level_directive}", "{few_shots}"):
            if placeholder not in self.system_template:
                raise InvalidTemplateError(
                    f"system template is missing placeholder {placeholder}"
                )

    def render_few_shots(self) -> str:
        blocks = []
        for question, answer in self.few_shots:
            blocks.append(f"Example dialogue:\nStudent: {question}\nTutor: {answer}")
        return "\n\n".join(blocks)

    def render_system_prompt(self, level: AssistanceLevel) -> str:
        """Full generation system message: step tag line, tutor rules,
        level directive, and few-shot example dialogues."""
        body = self.system_template.format(
            level_directive=self.level_directives[level],
            few_shots=self.render_few_shots(),
        )
        return f"STEP: {StepTag.GENERATION.value}\n{body}"

    def render_generation_user(
        self, context_bundle: str, history: str, question: str
    ) -> str:
        return self.generation_user_template.format(
            context_bundle=context_bundle, history=history, question=question
        )


def combine_verdicts(
    static: GuardrailVerdict, llm: GuardrailVerdict | None
) -> GuardrailVerdict:
    if llm is None:
        return static
    return GuardrailVerdict(
        passed=static.passed and llm.passed,
        violations=static.violations | llm.violations,
        source=VerdictSource.BOTH,
    )


class ExchangeRecorder(Protocol):
    def record(self, exchange: LlmExchange) -> None: ...

    def warn(self, message: str) -> None: ...


class _NullRecorder:
    def record(self, exchange: LlmExchange) -> None:
        pass

    def warn(self, message: str) -> None:
        pass


class GuardrailEngine:
    """Runs the post-generation checks and the refinement loop."""

    def __init__(
        self,
        backend: ChatBackend,
        code_keywords: tuple[str, ...] = DEFAULT_CODE_KEYWORDS,
    ):
        self._backend = backend
        self._code_keywords = code_keywords

    def static_scan(self, draft: str) -> GuardrailVerdict:
        return static_scan(draft, self._code_keywords)

    def llm_self_check(
        self, draft: str, recorder: ExchangeRecorder | None = None
    ) -> GuardrailVerdict:
        """Ask the model whether the draft obeys the tutor rules.

        The completion's first line must be exactly "PASS" to pass;
        anything else fails closed as a solution reveal.
        """
        recorder = recorder or _NullRecorder()
        prompt = build_prompt(
            StepTag.SELF_CHECK,
            _SELF_CHECK_RULES,
            f"Draft reply:\n{draft}",
        )
        exchange = self._backend.complete(prompt)
        recorder.record(exchange)
        raw_lines = exchange.completion.splitlines()
        first_line = raw_lines[0].strip() if raw_lines else ""
        if first_line == "PASS":
            return GuardrailVerdict(
                passed=True, violations=frozenset(), source=VerdictSource.LLM_SELF_CHECK
            )
        if not first_line.startswith("FAIL"):
            recorder.warn(
                f"self-check verdict unparseable ({first_line!r}), treated as FAIL"
            )
        return GuardrailVerdict(
            passed=False,
            violations=frozenset({Violation.SOLUTION_REVEAL}),
            source=VerdictSource.LLM_SELF_CHECK,
        )

    def refine_until_safe(
        self,
        generate: Callable[[AssistanceLevel], str],
        initial_level: AssistanceLevel = AssistanceLevel.L3,
        max_refinements: int = 3,
        recorder: ExchangeRecorder | None = None,
    ) -> tuple[str, tuple[DraftRecord, ...], Outcome]:
        """Generate, check, and regenerate at decreasing assistance levels.

        At most max_refinements + 1 drafts are produced. A draft passing
        both checks is returned with outcome answered; exhaustion returns
        the fixed fallback message with outcome fallback.
        """
        level = initial_level
        drafts: list[DraftRecord] = []
        for _ in range(max_refinements + 1):
            draft = generate(level)
            static = self.static_scan(draft)
            llm = self.llm_self_check(draft, recorder) if static.passed else None
            verdict = combine_verdicts(static, llm)
            drafts.append(DraftRecord(text=draft, verdict=verdict, level=level))
            if verdict.passed:
                return draft, tuple(drafts), Outcome.ANSWERED
            level = level.lowered()
        return FALLBACK_TEMPLATE, tuple(drafts), Outcome.FALLBACK
