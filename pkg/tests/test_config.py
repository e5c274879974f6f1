import pytest

from codetutor.config import Settings, load_settings
from codetutor.errors import ConfigError
from codetutor.guardrails import DEFAULT_CODE_KEYWORDS


def test_defaults():
    settings = load_settings(env={})
    assert settings == Settings()
    assert settings.relevance_threshold == 5
    assert settings.max_refinements == 3
    assert settings.context_budget_chars == 24_000
    assert settings.llm_backend == "mock"
    assert settings.code_keywords == DEFAULT_CODE_KEYWORDS


def test_file_then_env_precedence(tmp_path):
    config = tmp_path / "tutor.conf"
    config.write_text(
        "# service tuning\n"
        "\n"
        "RELEVANCE_THRESHOLD = 7\n"
        "STORE_DIR=/tmp/file-store\n"
        "LLM_MODEL=file-model\n",
        encoding="utf-8",
    )
    settings = load_settings(config, env={"LLM_MODEL": "env-model"})
    assert settings.relevance_threshold == 7
    assert settings.store_dir == "/tmp/file-store"
    assert settings.llm_model == "env-model"


def test_env_only(tmp_path):
    settings = load_settings(env={
        "LLM_BACKEND": "http",
        "LLM_ENDPOINT": "http://llm.internal:9000",
        "MAX_REFINEMENTS": "0",
        "CODE_KEYWORDS": "fn , match,  let",
        "CORS_ORIGIN": "http://localhost:5173",
    })
    assert settings.llm_backend == "http"
    assert settings.llm_endpoint == "http://llm.internal:9000"
    assert settings.max_refinements == 0
    assert settings.code_keywords == ("fn", "match", "let")
    assert settings.cors_origin == "http://localhost:5173"


def test_bind_addr_split():
    settings = Settings(bind_addr="0.0.0.0:9001")
    assert settings.host == "0.0.0.0"
    assert settings.port == 9001
    with pytest.raises(ConfigError):
        Settings(bind_addr="no-port-here").port


def test_unrelated_env_vars_are_ignored():
    settings = load_settings(env={"PATH": "/usr/bin", "HOME": "/root"})
    assert settings == Settings()


def test_unknown_file_key_rejected(tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("NOT_A_KEY=x\n", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        load_settings(config, env={})
    assert "NOT_A_KEY" in str(excinfo.value)


@pytest.mark.parametrize(
    "env",
    [
        {"RELEVANCE_THRESHOLD": "0"},
        {"RELEVANCE_THRESHOLD": "11"},
        {"RELEVANCE_THRESHOLD": "five"},
        {"MAX_REFINEMENTS": "-1"},
        {"CONTEXT_BUDGET_CHARS": "0"},
        {"LLM_BACKEND": "carrier-pigeon"},
        {"CODE_KEYWORDS": " , ,"},
    ],
)
def test_invalid_values_rejected(env):
    with pytest.raises(ConfigError):
        load_settings(env=env)


def test_malformed_file_lines(tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("LLM_MODEL=ok\njust words\n", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        load_settings(config, env={})
    assert "bad.conf:2" in str(excinfo.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(tmp_path / "absent.conf", env={})
