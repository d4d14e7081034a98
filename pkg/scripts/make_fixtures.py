"""Generate the committed LLM transcript fixtures for Wrocław 2017.

Runs the real prediction pipeline in record mode against a scripted
transport, so every stored transcript is keyed by the exact prompt hash
the pipeline will ask for at replay time.  Responses are deterministic
functions of (variant, project), styled as short reasoning followed by
the required ``PREDICTION: <integer>`` line.

Response characteristics per variant:

* NC    — predictions drawn from a small table of class values keyed by
          category and cost tercile, so many projects tie (band structure).
* RAG / RAG_SB / IC — true votes perturbed by seeded lognormal noise and
          rounded to two significant digits; tighter noise for IC.

Usage: python scripts/make_fixtures.py --data data/campaigns --out data/fixtures/transcripts
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from pbcast.data import load_campaign_dir
from pbcast.embeddings import HashingEmbedder
from pbcast.llm.client import ChatClient, LlmConfig, TranscriptStore
from pbcast.llm.pipeline import run_campaign_prediction
from pbcast.llm.prompts import PromptVariant

RANK_NOISE = {"RAG": 32.0, "RAG_SB": 28.0, "IC": 14.0}  # rank positions, n = 50
NC_CLASS_VALUES = (150, 300, 500, 800, 1200, 2000, 3000, 4500)
NC_CATEGORY_PRIOR = {
    "Green spaces": 3,
    "Sport and recreation": 2,
    "Roads and pavements": 2,
    "Culture": 1,
    "Education": 1,
    "Public safety": 0,
}

STEP_BACK_TEXT = """Looking at the past results, a few regularities stand out.

1. Green and recreational projects (parks, playgrounds, tree planting) trend above average.
2. Larger investments attract attention: expensive projects often gather more votes.
3. Projects in densely populated districts outperform peripheral ones.
4. Clear, concrete benefits for families beat abstract proposals.

These principles guide the prediction below."""

REASONING_SNIPPETS = (
    "The category suggests a solid base of support among residents.",
    "The cost level makes the project visible city-wide.",
    "The district has an active voter base in this kind of campaign.",
    "Comparable proposals performed consistently in the past.",
    "The description promises concrete, family-oriented benefits.",
)


def _seed(variant: str, project_id: str) -> int:
    digest = hashlib.sha256(f"{variant}|{project_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _round_sig2(value: float) -> int:
    if value <= 0:
        return 0
    magnitude = 10 ** max(0, int(np.floor(np.log10(value))) - 1)
    return int(round(value / magnitude) * magnitude)


def scripted_prediction(variant: str, project, campaign) -> int:
    rng = np.random.default_rng(_seed(variant, project.id))
    if variant == "NC":
        costs = sorted(p.cost for p in campaign.projects)
        tercile = 0 if project.cost <= costs[len(costs) // 3] else (
            1 if project.cost <= costs[2 * len(costs) // 3] else 2
        )
        prior = NC_CATEGORY_PRIOR.get(project.category, 1)
        index = min(len(NC_CLASS_VALUES) - 1, prior + 2 * tercile)
        return NC_CLASS_VALUES[index]
    # context variants: perturb the project's true rank, then read the vote
    # scale off the campaign's sorted counts, so predictions look plausible
    votes_desc = sorted((p.votes for p in campaign.projects), reverse=True)
    true_rank = sorted(
        campaign.projects, key=lambda p: (-p.votes, p.cost, p.id)
    ).index(project)
    noisy_rank = int(
        np.clip(round(true_rank + RANK_NOISE[variant] * rng.normal()), 0, len(votes_desc) - 1)
    )
    return max(10, _round_sig2(votes_desc[noisy_rank]))


def scripted_response(variant: str, project, campaign) -> str:
    rng = np.random.default_rng(_seed(variant, project.id) + 1)
    picks = rng.choice(len(REASONING_SNIPPETS), size=2, replace=False)
    value = scripted_prediction(variant, project, campaign)
    lines = [
        f"Let me assess this proposal step by step.",
        REASONING_SNIPPETS[picks[0]],
        REASONING_SNIPPETS[picks[1]],
        f"Balancing these factors, I settle on an estimate.",
        f"PREDICTION: {value}",
    ]
    return "\n".join(lines)


def make_transport(target, variants_markers):
    """Map an incoming prompt back to (variant, project) and answer it."""

    def transport(payload: dict) -> dict:
        prompt = payload["messages"][0]["content"]
        if "general principles" in prompt and "Summary of the" in prompt:
            text = STEP_BACK_TEXT
        else:
            variant = None
            for name, marker in variants_markers.items():
                if marker in prompt:
                    variant = name
                    break
            if variant is None:
                variant = "NC"
            project = None
            for p in target.projects:
                if f"- Title: {p.title}\n- Description: {p.description}" in prompt:
                    project = p
                    break
            if project is None:
                raise RuntimeError("scripted transport could not identify the project")
            text = scripted_response(variant, project, target)
        return {
            "choices": [{"message": {"content": text}}],
            "usage": {
                "prompt_tokens": len(prompt.split()),
                "completion_tokens": len(text.split()),
            },
        }

    return transport


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", type=Path, default=Path("data/campaigns"))
    parser.add_argument("--out", type=Path, default=Path("data/fixtures/transcripts"))
    args = parser.parse_args()

    past = load_campaign_dir(args.data / "wroclaw-2016")
    target = load_campaign_dir(args.data / "wroclaw-2017")
    embedder = HashingEmbedder(dim=256)
    if args.out.exists():
        import shutil

        shutil.rmtree(args.out)
    store = TranscriptStore(args.out)

    markers = {
        "RAG_SB": "General principles about what makes projects succeed",
        "RAG": "Results of past projects most similar",
        "IC": "Complete list of projects from the",
    }
    transport = make_transport(target, markers)
    config = LlmConfig(mode="record", max_in_flight=1)
    client = ChatClient(config, store=store, transport=transport)

    for kind in ("NC", "RAG", "RAG_SB", "IC"):
        variant = PromptVariant(kind=kind, language=target.language)
        run = run_campaign_prediction(
            variant, target, past if kind != "NC" else None,
            client, embedder=embedder, retrieval_size=5,
        )
        values = [r.predicted_votes for r in run.records]
        distinct = len(set(values))
        print(f"{kind}: {len(run.records)} records, {distinct} distinct values, "
              f"gaps {run.gap_count}")
    print(f"stored transcripts: {len(store)}")


if __name__ == "__main__":
    main()
