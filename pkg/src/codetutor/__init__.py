"""Context-aware tutoring service for programming exercises.

A four-step pipeline turns each student question into a hint: relevance
gating, repository file selection, context-grounded generation, and a
self-check refinement loop that keeps complete solutions out of replies.
"""

from .config import Settings, load_settings
from .context import ExerciseFixture, assemble_context, load_fixture
from .domain import (
    AssistanceLevel,
    GuardrailVerdict,
    Message,
    Outcome,
    PipelineTrace,
    Role,
    Session,
    SessionState,
    Violation,
)
from .guardrails import GuardrailEngine, PromptTemplates, static_scan
from .llm import HttpBackend, MockBackend, load_mock_script
from .pipeline import Pipeline
from .server import build_app, build_service, create_app
from .service import TutorService
from .store import SessionStore

__version__ = "0.1.0"

__all__ = [
    "AssistanceLevel",
    "ExerciseFixture",
    "GuardrailEngine",
    "GuardrailVerdict",
    "HttpBackend",
    "Message",
    "MockBackend",
    "Outcome",
    "Pipeline",
    "PipelineTrace",
    "PromptTemplates",
    "Role",
    "Session",
    "SessionState",
    "SessionStore",
    "Settings",
    "TutorService",
    "Violation",
    "assemble_context",
    "build_app",
    "build_service",
    "create_app",
    "load_fixture",
    "load_mock_script",
    "load_settings",
    "static_scan",
    "__version__",
]
