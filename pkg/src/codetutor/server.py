"""HTTP facade over the tutoring service.

Endpoints return the domain JSON encodings directly; every error body is
{"code", "message"} with the status chosen by the error code.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import Settings
from .errors import TutorError
from .guardrails import GuardrailEngine, PromptTemplates
from .llm import ChatBackend, HttpBackend, MockBackend, MockScript
from .pipeline import Pipeline
from .service import TutorService
from .store import SessionStore

_STATUS_BY_CODE = {
    "empty_content": 400,
    "alternation_violation": 400,
    "session_closed": 400,
    "invalid_request": 400,
    "not_found": 404,
    "busy": 409,
    "unknown_exercise": 422,
    "backend_unavailable": 503,
}


class CreateSessionBody(BaseModel):
    exercise_id: str
    student_id: str


class PostMessageBody(BaseModel):
    content: str


def create_app(service: TutorService, cors_origin: str | None = None) -> FastAPI:
    app = FastAPI(title="codetutor", docs_url=None, redoc_url=None)

    if cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(TutorError)
    async def tutor_error_handler(request: Request, exc: TutorError) -> JSONResponse:
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(
            status_code=status, content={"code": exc.code, "message": str(exc)}
        )

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(
        request: Request, exc: RequestValidationError
    ) -> JSONResponse:
        problems = "; ".join(
            "{}: {}".format(
                ".".join(str(part) for part in error.get("loc", ())),
                error.get("msg", "invalid value"),
            )
            for error in exc.errors()
        )
        return JSONResponse(
            status_code=400,
            content={"code": "invalid_request", "message": problems or "invalid request"},
        )

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody) -> dict:
        return service.create_session(body.exercise_id, body.student_id).to_dict()

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return service.get_session(session_id).to_dict()

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: PostMessageBody) -> dict:
        tutor_message, outcome = service.handle_message(session_id, body.content)
        return {"tutor_message": tutor_message.to_dict(), "outcome": outcome.value}

    @app.get("/api/sessions/{session_id}/traces/{sequence}")
    def get_trace(session_id: str, sequence: int) -> dict:
        return service.get_trace(session_id, sequence).to_dict()

    @app.get("/api/exercises")
    def list_exercises() -> list[dict]:
        return service.list_exercises()

    return app


def build_backend(settings: Settings) -> ChatBackend:
    if settings.llm_backend == "mock":
        if settings.mock_script_path:
            return MockBackend.from_file(Path(settings.mock_script_path))
        return MockBackend(MockScript([]))
    return HttpBackend(
        endpoint=settings.llm_endpoint,
        model=settings.llm_model,
        api_key=settings.llm_api_key,
    )


def build_service(settings: Settings, backend: ChatBackend | None = None) -> TutorService:
    """Wire up the full service from settings; backend may be injected."""
    if backend is None:
        backend = build_backend(settings)
    template_dir = Path(settings.template_dir) if settings.template_dir else None
    templates = PromptTemplates.load(template_dir)
    templates.validate()
    guardrails = GuardrailEngine(backend, code_keywords=settings.code_keywords)
    pipeline = Pipeline(
        backend,
        templates,
        guardrails,
        relevance_threshold=settings.relevance_threshold,
        max_refinements=settings.max_refinements,
        context_budget=settings.context_budget_chars,
    )
    store = SessionStore(settings.store_dir)
    return TutorService(pipeline, guardrails, store, settings.fixtures_dir)


def build_app(settings: Settings, backend: ChatBackend | None = None) -> FastAPI:
    return create_app(build_service(settings, backend), settings.cors_origin)
