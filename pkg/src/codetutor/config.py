"""Service configuration.

Settings come from three layers, later wins: built-in defaults, an
optional key=value config file, then process environment variables. All
keys share one flat namespace (LLM_ENDPOINT, RELEVANCE_THRESHOLD, ...).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError
from .guardrails import DEFAULT_CODE_KEYWORDS

_KNOWN_KEYS = (
    "LLM_ENDPOINT",
    "LLM_MODEL",
    "LLM_API_KEY",
    "LLM_BACKEND",
    "MOCK_SCRIPT_PATH",
    "RELEVANCE_THRESHOLD",
    "MAX_REFINEMENTS",
    "CONTEXT_BUDGET_CHARS",
    "FIXTURES_DIR",
    "STORE_DIR",
    "BIND_ADDR",
    "CORS_ORIGIN",
    "TEMPLATE_DIR",
    "CODE_KEYWORDS",
)


@dataclass(frozen=True)
class Settings:
    llm_endpoint: str = "http://127.0.0.1:9000"
    llm_model: str = "gpt-3.5-turbo"
    llm_api_key: str = ""
    llm_backend: str = "mock"
    mock_script_path: str | None = None
    relevance_threshold: int = 5
    max_refinements: int = 3
    context_budget_chars: int = 24_000
    fixtures_dir: str = "fixtures"
    store_dir: str = "data"
    bind_addr: str = "127.0.0.1:8080"
    cors_origin: str | None = None
    template_dir: str | None = None
    code_keywords: tuple[str, ...] = DEFAULT_CODE_KEYWORDS

    @property
    def host(self) -> str:
        return self.bind_addr.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        try:
            return int(self.bind_addr.rsplit(":", 1)[1])
        except (IndexError, ValueError):
            raise ConfigError(f"BIND_ADDR has no port: {self.bind_addr!r}")


def _parse_file(path: Path) -> dict[str, str]:
    """key=value lines; blank lines and # comments are ignored."""
    values: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected KEY=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _parse_int(key: str, raw: str, minimum: int) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw!r}")
    if value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _apply(settings: Settings, values: dict[str, str]) -> Settings:
    updates: dict[str, object] = {}
    for key, raw in values.items():
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if key == "RELEVANCE_THRESHOLD":
            value = _parse_int(key, raw, minimum=1)
            if value > 10:
                raise ConfigError(f"{key} must be <= 10, got {value}")
            updates["relevance_threshold"] = value
        elif key == "MAX_REFINEMENTS":
            updates["max_refinements"] = _parse_int(key, raw, minimum=0)
        elif key == "CONTEXT_BUDGET_CHARS":
            updates["context_budget_chars"] = _parse_int(key, raw, minimum=1)
        elif key == "LLM_BACKEND":
            if raw not in ("http", "mock"):
                raise ConfigError(f"LLM_BACKEND must be http or mock, got {raw!r}")
            updates["llm_backend"] = raw
        elif key == "CODE_KEYWORDS":
            keywords = tuple(k.strip() for k in raw.split(",") if k.strip())
            if not keywords:
                raise ConfigError("CODE_KEYWORDS must list at least one keyword")
            updates["code_keywords"] = keywords
        else:
            updates[key.lower()] = raw
    return replace(settings, **updates)


def load_settings(
    config_file: str | Path | None = None,
    env: dict[str, str] | None = None,
) -> Settings:
    """Defaults, overlaid by the config file, overlaid by the environment."""
    settings = Settings()
    if config_file is not None:
        settings = _apply(settings, _parse_file(Path(config_file)))
    env = os.environ if env is None else env
    from_env = {k: env[k] for k in _KNOWN_KEYS if k in env}
    return _apply(settings, from_env)
