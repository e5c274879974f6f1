"""Exercise fixtures and budgeted context assembly.

A fixture directory stands in for the learning platform: it holds the
problem statement, a snapshot of the student's repository, and optional
build log and test feedback. ``assemble_context`` packs those parts into
a character-budgeted bundle that grounds hint generation.

Fixture layout:
    <root>/problem.md          required
    <root>/repo/**             student code, ingested recursively
    <root>/buildlog.txt        optional
    <root>/tests.json          optional, array of {"test_name","passed","message"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .domain import utcnow
from .errors import (
    MissingProblemStatementError,
    UnknownPathError,
    UnreadableRootError,
)

MAX_FILE_BYTES = 256 * 1024
BUILD_LOG_TAIL_LINES = 100
TRUNCATION_MARKER = "[...truncated...]"
DEFAULT_CONTEXT_BUDGET = 24_000


@dataclass(frozen=True)
class RepositorySnapshot:
    """Text files of one exercise repository, keyed by normalized relative
    path (forward slashes, no leading slash, no traversal segments)."""

    files: dict[str, str]
    captured_at: datetime


@dataclass(frozen=True)
class TestResult:
    test_name: str
    passed: bool
    message: str


@dataclass(frozen=True)
class ExerciseFixture:
    exercise_id: str
    problem_statement: str
    repository: RepositorySnapshot
    build_log: str | None
    test_feedback: tuple[TestResult, ...] | None
    warnings: tuple[str, ...] = ()

    @property
    def title(self) -> str:
        """First markdown heading of the problem statement, or the id."""
        for line in self.problem_statement.splitlines():
            stripped = line.strip()
            if stripped.startswith("#"):
                return stripped.lstrip("#").strip() or self.exercise_id
        return self.exercise_id


@dataclass(frozen=True)
class ContextBundle:
    """Budgeted context for one generation call.

    ``total_chars`` is the sum of the character counts of the included
    parts (markers included); it never exceeds the budget as long as the
    budget covers the problem statement, which is never truncated.
    """

    problem_statement: str
    selected_file_contents: tuple[tuple[str, str], ...]
    test_feedback_rendered: str
    build_log_excerpt: str | None
    total_chars: int

    def render(self) -> str:
        sections = [f"## Problem statement\n{self.problem_statement}"]
        if self.test_feedback_rendered:
            sections.append(f"## Test results\n{self.test_feedback_rendered}")
        for path, content in self.selected_file_contents:
            sections.append(f"## File: {path}\n{content}")
        if self.build_log_excerpt is not None:
            sections.append(f"## Build log\n{self.build_log_excerpt}")
        return "\n\n".join(sections)


def load_fixture(root: Path) -> ExerciseFixture:
    """Load one exercise fixture from disk.

    Repository files larger than 256 KiB or that fail UTF-8 decoding are
    skipped, each with a recorded warning on the fixture.
    """
    root = Path(root)
    if not root.is_dir():
        raise UnreadableRootError(f"fixture root {root} is not a directory")
    problem_path = root / "problem.md"
    if not problem_path.is_file():
        raise MissingProblemStatementError(f"{root} has no problem.md")
    try:
        problem_statement = problem_path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableRootError(f"cannot read {problem_path}: {exc}")
    if not problem_statement.strip():
        raise MissingProblemStatementError(f"{problem_path} is empty")

    warnings: list[str] = []
    files: dict[str, str] = {}
    repo_dir = root / "repo"
    if repo_dir.is_dir():
        for path in sorted(repo_dir.rglob("*")):
            if not path.is_file():
                continue
            rel = path.relative_to(repo_dir).as_posix()
            if ".." in rel.split("/"):
                warnings.append(f"skipped {rel}: traversal segment")
                continue
            try:
                raw = path.read_bytes()
            except OSError as exc:
                warnings.append(f"skipped {rel}: {exc}")
                continue
            if len(raw) > MAX_FILE_BYTES:
                warnings.append(f"skipped {rel}: larger than {MAX_FILE_BYTES} bytes")
                continue
            try:
                files[rel] = raw.decode("utf-8")
            except UnicodeDecodeError:
                warnings.append(f"skipped {rel}: not valid text")
                continue

    build_log: str | None = None
    log_path = root / "buildlog.txt"
    if log_path.is_file():
        try:
            build_log = log_path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise UnreadableRootError(f"cannot read {log_path}: {exc}")

    test_feedback: tuple[TestResult, ...] | None = None
    tests_path = root / "tests.json"
    if tests_path.is_file():
        try:
            entries = json.loads(tests_path.read_text(encoding="utf-8"))
            test_feedback = tuple(
                TestResult(
                    test_name=entry["test_name"],
                    passed=bool(entry["passed"]),
                    message=entry["message"],
                )
                for entry in entries
            )
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UnreadableRootError(f"cannot parse {tests_path}: {exc}")

    return ExerciseFixture(
        exercise_id=root.name,
        problem_statement=problem_statement,
        repository=RepositorySnapshot(files=files, captured_at=utcnow()),
        build_log=build_log,
        test_feedback=test_feedback,
        warnings=tuple(warnings),
    )


def render_file_listing(
    snapshot: RepositorySnapshot, build_log_available: bool = False
) -> str:
    """One "- <path>" line per file, sorted, plus a final "- BUILD_LOG"
    line when a build log can be requested."""
    lines = [f"- {path}" for path in sorted(snapshot.files)]
    if build_log_available:
        lines.append("- BUILD_LOG")
    return "\n".join(lines)


def render_test_feedback(feedback: tuple[TestResult, ...] | None) -> str:
    if not feedback:
        return ""
    return "\n".join(
        f"{'PASS' if t.passed else 'FAIL'} {t.test_name}: {t.message}"
        for t in feedback
    )


def _fit(text: str, remaining: int, keep: str) -> tuple[str | None, bool]:
    """Fit ``text`` into ``remaining`` chars.

    Returns (included_text, exhausted). Whole text fits untouched;
    otherwise it is cut (keeping the head or the tail) and terminated
    with the truncation marker, or dropped when not even the marker fits.
    """
    if len(text) <= remaining:
        return text, False
    suffix = "\n" + TRUNCATION_MARKER
    content_len = remaining - len(suffix)
    if content_len <= 0:
        return None, True
    kept = text[:content_len] if keep == "head" else text[-content_len:]
    return kept + suffix, True


def assemble_context(
    fixture: ExerciseFixture,
    selected: list[str],
    include_build_log: bool,
    budget: int = DEFAULT_CONTEXT_BUDGET,
) -> ContextBundle:
    """Pack context parts into ``budget`` characters.

    Strict priority when the budget binds: problem statement (never
    truncated), then test feedback, then selected files in selection
    order, then the build log (its last 100 lines, cut head-ward if
    needed). Once one part is truncated or dropped, every lower-priority
    part is dropped, which keeps inclusion monotone in the budget.
    """
    for path in selected:
        if path not in fixture.repository.files:
            raise UnknownPathError(f"selected path {path!r} is not in the snapshot")

    problem = fixture.problem_statement
    remaining = max(budget - len(problem), 0)
    exhausted = budget < len(problem)

    feedback_rendered = ""
    feedback = render_test_feedback(fixture.test_feedback)
    if feedback and not exhausted:
        fitted, exhausted = _fit(feedback, remaining, keep="head")
        if fitted is not None:
            feedback_rendered = fitted
            remaining -= len(fitted)

    file_contents: list[tuple[str, str]] = []
    for path in selected:
        if exhausted:
            break
        fitted, exhausted = _fit(
            fixture.repository.files[path], remaining, keep="head"
        )
        if fitted is not None:
            file_contents.append((path, fitted))
            remaining -= len(fitted)

    build_log_excerpt: str | None = None
    if include_build_log and fixture.build_log is not None and not exhausted:
        excerpt = "\n".join(fixture.build_log.splitlines()[-BUILD_LOG_TAIL_LINES:])
        fitted, exhausted = _fit(excerpt, remaining, keep="tail")
        if fitted is not None:
            build_log_excerpt = fitted
            remaining -= len(fitted)

    total = (
        len(problem)
        + len(feedback_rendered)
        + sum(len(content) for _, content in file_contents)
        + (len(build_log_excerpt) if build_log_excerpt is not None else 0)
    )
    return ContextBundle(
        problem_statement=problem,
        selected_file_contents=tuple(file_contents),
        test_feedback_rendered=feedback_rendered,
        build_log_excerpt=build_log_excerpt,
        total_chars=total,
    )
