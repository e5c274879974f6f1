"""Exception hierarchy with machine-readable error codes.

Every error that can cross a module or API boundary carries a stable
``code`` string; the HTTP layer maps codes to status codes and the CLI
maps them to exit codes.
"""

from __future__ import annotations


class TutorError(Exception):
    """Base class for all service errors."""

    code = "internal_error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class UnknownExerciseError(TutorError):
    code = "unknown_exercise"


class EmptyContentError(TutorError):
    code = "empty_content"


class AlternationViolationError(TutorError):
    code = "alternation_violation"


class SessionClosedError(TutorError):
    code = "session_closed"


class SessionBusyError(TutorError):
    code = "busy"


class BackendError(TutorError):
    """Base for chat-completion backend failures."""

    code = "backend_error"


class BackendUnavailableError(BackendError):
    code = "backend_unavailable"


class MockExhaustedError(BackendError):
    code = "mock_exhausted"


class MockMismatchError(BackendError):
    code = "mock_mismatch"


class ScriptParseError(TutorError):
    code = "parse_error"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class UnknownStepTagError(TutorError):
    code = "unknown_step_tag"


class MissingProblemStatementError(TutorError):
    code = "missing_problem_statement"


class UnreadableRootError(TutorError):
    code = "unreadable_root"


class UnknownPathError(TutorError):
    """A selected path is not in the snapshot. Indicates a pipeline defect,
    not a user error: file selection validates paths before context assembly."""

    code = "unknown_path"


class InvalidTemplateError(TutorError):
    code = "invalid_template"


class NotFoundError(TutorError):
    code = "not_found"


class IoError(TutorError):
    code = "io_error"


class CorruptRecordError(TutorError):
    """A stored record failed to parse; the message names the file."""

    code = "corrupt_record"

    def __init__(self, message: str, path: str | None = None):
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)
        self.path = path


class ConfigError(TutorError):
    code = "config_error"
