"""Full-campaign prediction runs over the chat client.

Each project is predicted from its own independent prompt; a failed
parse is retried once with a format reminder appended, then recorded as
a gap.  Replay-mode runs carry a fixed timestamp so their serialized
form is byte-identical across invocations.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from ..data import Campaign, PredictionRecord, PredictionRun, utc_timestamp
from ..embeddings import Embedder
from .client import ChatClient
from .prompts import (
    PredictionParseError,
    PromptVariant,
    build_prompt,
    build_step_back_prompt,
    format_reminder,
    parse_prediction,
    retrieve_similar,
)

log = logging.getLogger(__name__)

REPLAY_TIMESTAMP = "19700101T000000.000000Z"


def run_campaign_prediction(
    variant: PromptVariant,
    target: Campaign,
    past: Optional[Campaign],
    client: ChatClient,
    embedder: Optional[Embedder] = None,
    retrieval_size: int = 5,
) -> PredictionRun:
    """Predict every project of ``target`` with one prompt variant.

    ``past`` is required for RAG/RAG_SB/IC; ``embedder`` only for the
    RAG variants (description retrieval).  Records keep each project's
    final prompt and raw response so runs are auditable.
    """
    needs_past = variant.kind in ("RAG", "RAG_SB", "IC")
    if needs_past and past is None:
        raise ValueError(f"{variant.kind} runs require the past campaign")
    if variant.kind in ("RAG", "RAG_SB") and embedder is None:
        raise ValueError(f"{variant.kind} runs require an embedder for retrieval")
    if variant.language != target.language:
        raise ValueError(
            f"prompt language {variant.language!r} does not match campaign "
            f"language {target.language!r}"
        )
    if needs_past and past.language != target.language:
        raise ValueError(
            f"past campaign language {past.language!r} does not match target "
            f"{target.language!r}"
        )

    step_back_insight = None
    if variant.kind == "RAG_SB":
        stage1 = client.complete(build_step_back_prompt(past, variant))
        step_back_insight = stage1.response

    def predict_one(project) -> PredictionRecord:
        retrieval = None
        if variant.kind in ("RAG", "RAG_SB"):
            retrieval = retrieve_similar(project, past, retrieval_size, embedder)
        prompt = build_prompt(
            variant,
            project,
            target,
            past=past,
            retrieval=retrieval,
            step_back_insight=step_back_insight,
        )
        transcript = client.complete(prompt)
        try:
            votes = parse_prediction(transcript.response)
            return PredictionRecord(
                project_id=project.id,
                predicted_votes=float(votes),
                prompt=prompt,
                response=transcript.response,
            )
        except PredictionParseError:
            retry_prompt = prompt + "\n\n" + format_reminder(variant.language)
            retry = client.complete(retry_prompt)
            try:
                votes = parse_prediction(retry.response)
                return PredictionRecord(
                    project_id=project.id,
                    predicted_votes=float(votes),
                    prompt=retry_prompt,
                    response=retry.response,
                )
            except PredictionParseError:
                log.warning("no parsable prediction for project %s", project.id)
                return PredictionRecord(
                    project_id=project.id,
                    predicted_votes=None,
                    prompt=retry_prompt,
                    response=retry.response,
                )

    max_workers = max(1, client.config.max_in_flight)
    if max_workers == 1 or client.config.mode == "replay":
        records = [predict_one(p) for p in target.projects]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(predict_one, target.projects))

    config = {
        "variant": variant.kind,
        "reasoning": variant.reasoning,
        "language": variant.language,
        "model": client.config.model,
        "temperature": client.config.temperature,
        "mode": client.config.mode,
        "retrieval_size": retrieval_size if variant.kind in ("RAG", "RAG_SB") else None,
        "embedding_provider": embedder.provider_id if embedder is not None else None,
        "past_campaign": past.key if past is not None else None,
    }
    timestamp = (
        REPLAY_TIMESTAMP if client.config.mode == "replay" else utc_timestamp()
    )
    return PredictionRun(
        campaign_key=target.key,
        campaign_city=target.city,
        campaign_year=target.year,
        language=target.language,
        model=variant.kind,
        records=tuple(records),
        config=config,
        timestamp=timestamp,
    )
