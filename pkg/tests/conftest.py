import pytest

from codetutor.context import load_fixture
from codetutor.guardrails import PromptTemplates

from helpers import BUBBLESORT


@pytest.fixture(scope="session")
def templates() -> PromptTemplates:
    loaded = PromptTemplates.load()
    loaded.validate()
    return loaded


@pytest.fixture(scope="session")
def bubblesort():
    return load_fixture(BUBBLESORT)
