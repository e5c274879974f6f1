"""Operational entry points.

serve            run the HTTP API until interrupted
ask              one-shot question against a fixture, reply on stdout
replay           re-run a recorded transcript and write trace files
eval-guardrails  static-scan a corpus of drafts, CSV report on stdout
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import Settings, load_settings
from .context import load_fixture
from .domain import (
    Outcome,
    Role,
    Session,
    SessionState,
    Violation,
    append_message,
    utcnow,
)
from .errors import TutorError
from .guardrails import GuardrailEngine, PromptTemplates, static_scan
from .llm import ChatBackend, MockBackend
from .pipeline import Pipeline, PipelineResult
from .server import build_app, build_backend
from .store import dump_record

EXIT_CONFIG_ERROR = 2
EXIT_REJECTED = 3
EXIT_FALLBACK = 4

_EXIT_BY_OUTCOME = {
    Outcome.ANSWERED: 0,
    Outcome.REJECTED_OFF_TOPIC: EXIT_REJECTED,
    Outcome.FALLBACK: EXIT_FALLBACK,
}


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_CONFIG_ERROR)


def _build_pipeline(settings: Settings, backend: ChatBackend) -> Pipeline:
    template_dir = Path(settings.template_dir) if settings.template_dir else None
    templates = PromptTemplates.load(template_dir)
    templates.validate()
    guardrails = GuardrailEngine(backend, code_keywords=settings.code_keywords)
    return Pipeline(
        backend,
        templates,
        guardrails,
        relevance_threshold=settings.relevance_threshold,
        max_refinements=settings.max_refinements,
        context_budget=settings.context_budget_chars,
    )


def _one_shot_session(exercise_id: str) -> Session:
    return Session(
        session_id="cli",
        exercise_id=exercise_id,
        student_id="cli",
        messages=(),
        created_at=utcnow(),
        state=SessionState.ACTIVE,
    )


def _trace_summary(result: PipelineResult) -> str:
    trace = result.trace
    lines = [
        f"outcome={trace.outcome.value}"
        f" relevance={trace.relevance_score}"
        f" gated={str(trace.gated).lower()}"
        f" files={','.join(trace.selected_files) or '-'}"
        f" refinements={trace.refinement_count}"
        f" llm_calls={len(trace.llm_calls)}"
    ]
    lines.extend(f"warning: {w}" for w in trace.warnings)
    return "\n".join(lines)


@click.group()
def main() -> None:
    """Context-aware programming-exercise tutor."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
def serve(config_path: str | None) -> None:
    """Run the HTTP API until interrupted."""
    import uvicorn

    try:
        settings = load_settings(config_path)
        app = build_app(settings)
        host, port = settings.host, settings.port
    except TutorError as exc:
        _fail(str(exc))
        return
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command()
@click.option("--fixture", "fixture_dir", type=click.Path(), required=True)
@click.option("--question", required=True)
@click.option("--history", "history_path", type=click.Path(), default=None)
@click.option("--mock", "mock_path", type=click.Path(), default=None)
def ask(
    fixture_dir: str,
    question: str,
    history_path: str | None,
    mock_path: str | None,
) -> None:
    """One-shot question; exits 0 answered, 3 rejected, 4 fallback."""
    try:
        settings = load_settings()
        if mock_path is not None:
            backend: ChatBackend = MockBackend.from_file(Path(mock_path))
        else:
            backend = build_backend(settings)
        pipeline = _build_pipeline(settings, backend)
        fixture = load_fixture(Path(fixture_dir))
        session = _one_shot_session(fixture.exercise_id)
        if history_path is not None:
            raw = json.loads(Path(history_path).read_text(encoding="utf-8"))
            for turn in raw:
                session = append_message(
                    session, Role(turn["role"]), turn["content"]
                )
    except (TutorError, OSError, ValueError, KeyError) as exc:
        _fail(str(exc))
        return

    try:
        result = pipeline.handle_message(session, fixture, question)
    except TutorError as exc:
        _fail(str(exc))
        return
    click.echo(result.reply)
    click.echo("")
    click.echo(_trace_summary(result))
    sys.exit(_EXIT_BY_OUTCOME[result.trace.outcome])


@main.command()
@click.option("--transcript", "transcript_path", type=click.Path(), required=True)
@click.option("--fixture", "fixture_dir", type=click.Path(), required=True)
@click.option("--mock", "mock_path", type=click.Path(), required=True)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(),
    default="replay-traces",
    show_default=True,
    help="Directory that receives one trace file per student turn.",
)
def replay(
    transcript_path: str, fixture_dir: str, mock_path: str, out_dir: str
) -> None:
    """Re-run a transcript; exits 1 on any reply divergence.

    The transcript is a JSON array of {student, expected_reply} pairs.
    Trace files are written as <out>/<sequence>.json.
    """
    try:
        settings = load_settings()
        backend = MockBackend.from_file(Path(mock_path))
        pipeline = _build_pipeline(settings, backend)
        fixture = load_fixture(Path(fixture_dir))
        turns = json.loads(Path(transcript_path).read_text(encoding="utf-8"))
        if not isinstance(turns, list):
            raise ValueError("transcript must be a JSON array")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
    except (TutorError, OSError, ValueError, KeyError) as exc:
        _fail(str(exc))
        return

    session = _one_shot_session(fixture.exercise_id)
    for index, turn in enumerate(turns):
        try:
            student = turn["student"]
            expected = turn["expected_reply"]
            result = pipeline.handle_message(session, fixture, student)
        except (TutorError, TypeError, KeyError) as exc:
            _fail(f"turn {index}: {exc}")
            return
        (out / f"{result.trace.message_sequence}.json").write_text(
            dump_record(result.trace.to_dict()), encoding="utf-8"
        )
        if result.reply != expected:
            click.echo(
                f"divergence at turn {index}:\n"
                f"  expected: {expected!r}\n"
                f"  actual:   {result.reply!r}",
                err=True,
            )
            sys.exit(1)
        session = append_message(session, Role.STUDENT, student)
        session = append_message(session, Role.TUTOR, result.reply)
    click.echo(f"replayed {len(turns)} turns, traces in {out_dir}")


@main.command("eval-guardrails")
@click.option("--corpus", "corpus_dir", type=click.Path(), required=True)
@click.option(
    "--figure",
    "figure_path",
    type=click.Path(),
    default=None,
    help="Also render the violation counts as a bar chart to this file.",
)
def eval_guardrails(corpus_dir: str, figure_path: str | None) -> None:
    """Static-scan every .txt draft under the corpus; CSV on stdout."""
    corpus = Path(corpus_dir)
    if not corpus.is_dir():
        _fail(f"corpus directory not found: {corpus_dir}")
        return
    try:
        settings = load_settings()
    except TutorError as exc:
        _fail(str(exc))
        return

    counts = {violation: 0 for violation in Violation}
    total = 0
    leaking = 0
    for path in sorted(corpus.rglob("*.txt")):
        draft = path.read_text(encoding="utf-8")
        verdict = static_scan(draft, settings.code_keywords)
        total += 1
        if not verdict.passed:
            leaking += 1
        for violation in verdict.violations:
            counts[violation] += 1

    click.echo("violation,count")
    for violation in Violation:
        click.echo(f"{violation.value},{counts[violation]}")
    click.echo(f"total_drafts,{total}")
    leak_rate = (leaking / total) if total else 0.0
    click.echo(f"leak_rate,{leak_rate:.4f}")

    if figure_path is not None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        labels = [violation.value for violation in Violation]
        values = [counts[violation] for violation in Violation]
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.bar(labels, values, color="#4477aa")
        ax.set_ylabel("drafts flagged")
        ax.set_title(f"static scan over {total} drafts")
        ax.tick_params(axis="x", rotation=20)
        fig.tight_layout()
        fig.savefig(figure_path)
        plt.close(fig)


if __name__ == "__main__":
    main()
