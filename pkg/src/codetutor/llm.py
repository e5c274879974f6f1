"""Pluggable chat-completion backend.

Two implementations: ``HttpBackend`` speaks the de-facto OpenAI-compatible
chat-completions wire format, ``MockBackend`` replays a scripted sequence
of replies and is the only backend tests use. Completions are returned
raw; all parsing happens downstream.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import (
    BackendUnavailableError,
    MockExhaustedError,
    MockMismatchError,
    ScriptParseError,
    UnknownStepTagError,
)


class StepTag(str, Enum):
    RELEVANCE = "relevance"
    FILE_SELECTION = "file_selection"
    GENERATION = "generation"
    SELF_CHECK = "self_check"


# Parse-sensitive steps run cold; generation gets some variety.
DEFAULT_TEMPERATURES = {
    StepTag.RELEVANCE: 0.0,
    StepTag.FILE_SELECTION: 0.0,
    StepTag.GENERATION: 0.5,
    StepTag.SELF_CHECK: 0.0,
}
DEFAULT_MAX_TOKENS = 1024

RETRY_DELAYS = (0.5, 2.0)
RETRYABLE_STATUS = {429}


@dataclass(frozen=True)
class ChatPrompt:
    """One fully-rendered request to the chat backend.

    The step tag is embedded verbatim as the first line of the system
    message ("STEP: <tag>") so mock dispatch and trace auditing can see
    which pipeline step issued the call.
    """

    step_tag: StepTag
    messages: tuple[tuple[str, str], ...]
    temperature: float
    max_tokens: int

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("prompt needs at least a system message")
        role, content = self.messages[0]
        if role != "system" or not content.strip():
            raise ValueError("first message must be a non-empty system message")
        expected = f"STEP: {self.step_tag.value}"
        if content.splitlines()[0] != expected:
            raise ValueError(f"system message must start with {expected!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature out of range [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def rendered(self) -> str:
        """Flat text view of the prompt, used for mock substring matching."""
        return "\n".join(f"{role}: {content}" for role, content in self.messages)


def build_prompt(
    step_tag: StepTag,
    system_body: str,
    user_content: str,
    *,
    history: tuple[tuple[str, str], ...] = (),
    temperature: float | None = None,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> ChatPrompt:
    """Assemble a ChatPrompt, prefixing the system message with its step tag."""
    system = f"STEP: {step_tag.value}\n{system_body}"
    messages = (("system", system),) + history + (("user", user_content),)
    if temperature is None:
        temperature = DEFAULT_TEMPERATURES[step_tag]
    return ChatPrompt(
        step_tag=step_tag,
        messages=messages,
        temperature=temperature,
        max_tokens=max_tokens,
    )


@dataclass(frozen=True)
class LlmExchange:
    """One request/response pair. ``completion`` is the raw backend output."""

    prompt: ChatPrompt
    completion: str
    latency_ms: int
    backend: str


class ChatBackend(Protocol):
    name: str

    def complete(self, prompt: ChatPrompt) -> LlmExchange: ...


@dataclass(frozen=True)
class MockScriptEntry:
    expect_step: StepTag
    expect_substring: str | None
    reply: str


class MockScript:
    """Ordered list of scripted replies, consumed strictly in order."""

    def __init__(self, entries: list[MockScriptEntry]):
        self.entries = list(entries)

    def __len__(self) -> int:
        return len(self.entries)


def load_mock_script(path: Path) -> MockScript:
    """Parse a mock script file: a JSON array of
    {"expect_step", "expect_substring", "reply"} objects."""
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScriptParseError(f"cannot read mock script {path}: {exc}")
    if not raw.strip():
        return MockScript([])
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScriptParseError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno)
    if not isinstance(data, list):
        raise ScriptParseError(f"mock script {path} must be a JSON array", line=1)
    entries = []
    for i, item in enumerate(data):
        try:
            step = StepTag(item["expect_step"])
        except ValueError:
            raise UnknownStepTagError(
                f"unknown step tag {item['expect_step']!r} in entry {i} of {path}"
            )
        except (KeyError, TypeError):
            raise ScriptParseError(f"entry {i} of {path} is missing expect_step")
        if "reply" not in item:
            raise ScriptParseError(f"entry {i} of {path} is missing reply")
        entries.append(
            MockScriptEntry(
                expect_step=step,
                expect_substring=item.get("expect_substring"),
                reply=str(item["reply"]),
            )
        )
    return MockScript(entries)


class MockBackend:
    """Deterministic scripted backend.

    Entries are consumed in order under a lock; each call must match the
    next entry's expected step (and optional prompt substring) or the
    backend raises, which makes test scripts self-verifying.
    """

    name = "mock"

    def __init__(self, script: MockScript):
        self._entries = list(script.entries)
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: Path) -> "MockBackend":
        return cls(load_mock_script(path))

    @property
    def remaining(self) -> int:
        return len(self._entries)

    def complete(self, prompt: ChatPrompt) -> LlmExchange:
        with self._lock:
            if not self._entries:
                raise MockExhaustedError(
                    f"mock script exhausted at step {prompt.step_tag.value}"
                )
            entry = self._entries[0]
            if entry.expect_step is not prompt.step_tag:
                raise MockMismatchError(
                    f"script expects step {entry.expect_step.value}, "
                    f"got {prompt.step_tag.value}"
                )
            if (
                entry.expect_substring is not None
                and entry.expect_substring not in prompt.rendered()
            ):
                raise MockMismatchError(
                    f"prompt for step {prompt.step_tag.value} does not contain "
                    f"{entry.expect_substring!r}"
                )
            self._entries.pop(0)
        return LlmExchange(
            prompt=prompt, completion=entry.reply, latency_ms=0, backend=self.name
        )


class HttpBackend:
    """OpenAI-compatible chat-completions client.

    Transient failures (timeouts, 429, 5xx) are retried twice with
    exponential backoff (0.5 s, 2 s) before raising backend_unavailable.
    """

    name = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str = "",
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not endpoint:
            raise BackendUnavailableError("LLM_ENDPOINT is not configured")
        self._url = endpoint.rstrip("/") + "/chat/completions"
        self._model = model
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            headers=headers, timeout=timeout, transport=transport
        )

    def complete(self, prompt: ChatPrompt) -> LlmExchange:
        payload = {
            "model": self._model,
            "messages": [
                {"role": role, "content": content} for role, content in prompt.messages
            ],
            "temperature": prompt.temperature,
            "max_tokens": prompt.max_tokens,
        }
        started = time.monotonic()
        last_failure = ""
        for attempt in range(len(RETRY_DELAYS) + 1):
            if attempt > 0:
                self._sleep(RETRY_DELAYS[attempt - 1])
            try:
                response = self._client.post(self._url, json=payload)
            except httpx.TimeoutException as exc:
                last_failure = f"timeout: {exc}"
                continue
            except httpx.HTTPError as exc:
                last_failure = f"transport error: {exc}"
                continue
            if response.status_code in RETRYABLE_STATUS or response.status_code >= 500:
                last_failure = f"status {response.status_code}"
                continue
            if response.status_code != 200:
                raise BackendUnavailableError(
                    f"backend returned status {response.status_code}"
                )
            try:
                completion = response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise BackendUnavailableError(f"malformed backend response: {exc}")
            latency_ms = int((time.monotonic() - started) * 1000)
            return LlmExchange(
                prompt=prompt,
                completion=completion,
                latency_ms=latency_ms,
                backend=self.name,
            )
        raise BackendUnavailableError(f"retries exhausted ({last_failure})")
