"""Shared fixtures: bundled data paths, small campaigns, scripted clients."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT / "src"))

from pbcast.data import Campaign, Project, discover_campaigns  # noqa: E402
from pbcast.llm.client import ChatClient, LlmConfig, TranscriptStore  # noqa: E402


DATA_ROOT = REPO_ROOT / "data"


@pytest.fixture(scope="session")
def campaigns() -> dict:
    return discover_campaigns(DATA_ROOT / "campaigns")


@pytest.fixture(scope="session")
def fixtures_store() -> TranscriptStore:
    return TranscriptStore(DATA_ROOT / "fixtures" / "transcripts")


@pytest.fixture
def replay_client(fixtures_store) -> ChatClient:
    return ChatClient(LlmConfig(mode="replay"), store=fixtures_store)


def make_project(i: int, votes=None, **overrides) -> Project:
    defaults = dict(
        id=f"P-{i:03d}",
        title=f"Bench and shade spot {i}",
        description=f"Install a bench with young trees for shade at location {i}. "
        "Residents asked for a calm resting place along the walking path.",
        category="outdoor",
        cost=100_00 * (i + 1),
        district="north" if i % 2 == 0 else "south",
        votes=votes,
    )
    defaults.update(overrides)
    return Project(**defaults)


def make_campaign(votes: list, offset: int = 0, **overrides) -> Campaign:
    projects = tuple(make_project(i + offset, votes=v) for i, v in enumerate(votes))
    defaults = dict(
        city="Testville",
        year=2030,
        currency="EUR",
        budget=1_000_000_00,
        voters=max(10_000, 2 * sum(v or 0 for v in votes)),
        total_votes=sum(v or 0 for v in votes),
        max_approvals=3,
        language="en",
        projects=projects,
    )
    defaults.update(overrides)
    return Campaign(**defaults)


class ScriptedClient:
    """Chat client replacement answering from a prompt -> response mapping.

    ``responder`` may be a dict (exact prompt match) or a callable.
    Records the prompts it served, in order.
    """

    def __init__(self, responder, model="scripted", temperature=0.0, mode="replay"):
        self.responder = responder
        self.calls: list[str] = []
        self.config = LlmConfig(model=model, temperature=temperature, mode="live")
        # tests that need replay semantics use a real ChatClient instead

    def complete(self, prompt: str):
        from datetime import datetime, timezone

        from pbcast.llm.client import Transcript, prompt_key

        self.calls.append(prompt)
        if callable(self.responder):
            text = self.responder(prompt)
        else:
            text = self.responder[prompt]
        return Transcript(
            prompt=prompt,
            response=text,
            model=self.config.model,
            temperature=self.config.temperature,
            prompt_tokens=len(prompt.split()),
            completion_tokens=len(text.split()),
            timestamp=datetime.now(timezone.utc).isoformat(),
            key=prompt_key(self.config.model, self.config.temperature, prompt),
        )
