"""JSON service for interactive what-if predictions.

Serves read-only campaign data (aggregate vote counts only — no
voter-level records exist anywhere in the system), evaluation reports
computed from persisted runs, and a what-if endpoint that scores a draft
proposal, inserts it into the campaign's latest predicted ranking and
reports its funding prospects under the greedy rule.

State is loaded once at startup and never mutated per request, so
replicas given identical data directories answer identically (exactly
so in replay mode).
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .data import Campaign, Project, RunStore, discover_campaigns
from .embeddings import Embedder
from .llm.client import ChatClient, LlmConfig, LlmError, ReplayMissError, TranscriptStore
from .llm.prompts import (
    PredictionParseError,
    PromptVariant,
    build_prompt,
    parse_prediction,
    retrieve_similar,
)
from .metrics import evaluate_run, greedy_allocate, rank_order
from .predictor import ClassicalPredictor, embedder_from_provider_id

PAIRINGS = {
    "toulouse-2024": "toulouse-2022",
    "wroclaw-2017": "wroclaw-2016",
}
LLM_MODELS = ("NC", "RAG", "RAG_SB", "IC")
TOP_K_FRACTIONS = (0.10, 0.20, 0.30)


class DraftProject(BaseModel):
    title: str = ""
    description: str = ""
    category: str = ""
    cost: int = 0
    district: str = ""


class WhatIfRequest(BaseModel):
    draft: DraftProject
    model: str = "KNN"
    language: Optional[str] = None


class ServiceState:
    def __init__(self, data_root: Path, llm_config: Optional[LlmConfig],
                 embedder: Optional[Embedder]):
        self.data_root = data_root
        self.campaigns = discover_campaigns(data_root / "campaigns")
        self.runs = RunStore(data_root / "runs")
        self.llm_config = llm_config
        self.explicit_embedder = embedder
        self.predictors: dict[tuple[str, str], ClassicalPredictor] = {}
        models_dir = data_root / "models"
        if models_dir.is_dir():
            for path in sorted(models_dir.glob("*.json")):
                try:
                    predictor = ClassicalPredictor.load(path)
                except ValueError:
                    continue
                for eval_key, train_key in PAIRINGS.items():
                    if predictor.train_campaign == train_key:
                        self.predictors[(predictor.model_id, eval_key)] = predictor
                # a predictor also serves the campaign it was trained on
                self.predictors.setdefault(
                    (predictor.model_id, predictor.train_campaign), predictor
                )

    def campaign(self, key: str) -> Campaign:
        if key not in self.campaigns:
            raise HTTPException(status_code=404, detail=f"unknown campaign {key!r}")
        return self.campaigns[key]

    def embedder_for(self, predictor: ClassicalPredictor) -> Embedder:
        if self.explicit_embedder is not None:
            return self.explicit_embedder
        try:
            return embedder_from_provider_id(predictor.schema.provider_id)
        except ValueError as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc

    def chat_client(self) -> ChatClient:
        if self.llm_config is None:
            raise HTTPException(
                status_code=503,
                detail="no LLM configured; retry with a classical model "
                       "or start the service with LLM settings",
            )
        store = None
        if self.llm_config.mode in ("record", "replay"):
            store = TranscriptStore(self.data_root / "fixtures" / "transcripts")
        return ChatClient(self.llm_config, store=store)


def _campaign_summary(campaign: Campaign) -> dict:
    return {
        "key": campaign.key,
        "city": campaign.city,
        "year": campaign.year,
        "language": campaign.language,
        "currency": campaign.currency,
        "budget": campaign.budget,
        "voters": campaign.voters,
        "total_votes": campaign.total_votes,
        "max_approvals": campaign.max_approvals,
        "n_projects": len(campaign.projects),
    }


def _validate_draft(draft: DraftProject, campaign: Campaign) -> list[str]:
    violations = []
    if not draft.title.strip():
        violations.append("title must not be empty")
    if not draft.description.strip():
        violations.append("description must not be empty")
    if not draft.category.strip():
        violations.append("category must not be empty")
    if not draft.district.strip():
        violations.append("district must not be empty")
    if draft.cost <= 0:
        violations.append("cost must be a positive integer (minor currency units)")
    return violations


def create_app(
    data_root: Path | str,
    llm_config: Optional[LlmConfig] = None,
    embedder: Optional[Embedder] = None,
) -> FastAPI:
    state = ServiceState(Path(data_root), llm_config, embedder)
    app = FastAPI(title="pbcast what-if service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.pbcast = state

    @app.get("/health")
    def health():
        return {"status": "ok", "campaigns": len(state.campaigns)}

    @app.get("/campaigns")
    def campaigns():
        return [
            _campaign_summary(c)
            for _, c in sorted(state.campaigns.items())
        ]

    @app.get("/campaigns/{key}")
    def campaign_detail(key: str):
        campaign = state.campaign(key)
        projects = [
            {
                "id": p.id,
                "title": p.title,
                "description": p.description,
                "category": p.category,
                "cost": p.cost,
                "district": p.district,
                "votes": p.votes,
            }
            for p in campaign.projects
        ]
        costs = [p.cost for p in campaign.projects]
        ids = [p.id for p in campaign.projects]
        votes = [p.votes for p in campaign.projects]
        real_ranking = None
        if all(v is not None for v in votes):
            order = rank_order(votes, costs, ids)
            real_ranking = [ids[i] for i in order]
        predicted = {}
        for model in ("PVM", "KNN") + LLM_MODELS:
            run = state.runs.latest(key, model)
            if run is None:
                continue
            values = run.predictions_for(campaign)
            order = rank_order(values, costs, ids)
            predicted[model] = [ids[i] for i in order]
        return {
            "campaign": _campaign_summary(campaign),
            "projects": projects,
            "real_ranking": real_ranking,
            "predicted_rankings": predicted,
        }

    @app.get("/campaigns/{key}/reports")
    def reports(key: str):
        campaign = state.campaign(key)
        out = []
        for model in ("PVM", "KNN") + LLM_MODELS + ("NULL",):
            run = state.runs.latest(key, model)
            if run is None:
                continue
            report = evaluate_run(run, campaign, force=True)
            out.append(
                {
                    "model": report.model,
                    "normalized_rmse": report.normalized_rmse,
                    "kendall_tau": report.kendall_tau,
                    "gap_count": report.gap_count,
                    "distinct_predictions": report.distinct_predictions,
                    "heavy_ties": report.heavy_ties,
                }
            )
        return {"campaign": key, "reports": out}

    @app.get("/campaigns/{key}/reports/{model}")
    def report_detail(key: str, model: str):
        campaign = state.campaign(key)
        run = state.runs.latest(key, model.upper())
        if run is None:
            raise HTTPException(
                status_code=404, detail=f"no persisted {model} run for {key}"
            )
        report = evaluate_run(run, campaign, force=True)
        values = run.predictions_for(campaign)
        return {
            "model": report.model,
            "campaign": report.campaign_key,
            "n_projects": report.n_projects,
            "gap_count": report.gap_count,
            "normalized_rmse": report.normalized_rmse,
            "kendall_tau": report.kendall_tau,
            "budget": report.budget,
            "distinct_predictions": report.distinct_predictions,
            "heavy_ties": report.heavy_ties,
            "greedy_funded_real": list(report.greedy_funded_real),
            "greedy_funded_pred": list(report.greedy_funded_pred),
            "series": [
                {
                    "k": k,
                    "jaccard": report.jaccard[i],
                    "cum_cost_real": report.cost_curve_real[i],
                    "cum_cost_pred": report.cost_curve_pred[i],
                }
                for i, k in enumerate(report.k_values)
            ],
            "scatter": [
                {
                    "id": p.id,
                    "real_votes": p.votes,
                    "predicted_votes": values[i],
                }
                for i, p in enumerate(campaign.projects)
            ],
        }

    @app.post("/campaigns/{key}/whatif")
    def whatif(key: str, request: WhatIfRequest):
        campaign = state.campaign(key)
        violations = _validate_draft(request.draft, campaign)
        if violations:
            raise HTTPException(status_code=400, detail=violations)
        model = request.model.upper()
        if model not in ("PVM", "KNN") + LLM_MODELS:
            raise HTTPException(status_code=400, detail=[f"unknown model {model!r}"])
        draft = Project(
            id="draft",
            title=request.draft.title.strip(),
            description=request.draft.description.strip(),
            category=request.draft.category.strip(),
            cost=request.draft.cost,
            district=request.draft.district.strip(),
            votes=None,
        )
        run = state.runs.latest(key, model)
        if run is None:
            raise HTTPException(
                status_code=503,
                detail=f"no persisted {model} run for {key}; "
                       f"produce one with `pbcast predict` and retry",
            )

        if model in ("PVM", "KNN"):
            predictor = state.predictors.get((model, key))
            if predictor is None:
                raise HTTPException(
                    status_code=503,
                    detail=f"no frozen {model} predictor for {key}; "
                           f"create one with `pbcast fit` and retry",
                )
            embedder = state.embedder_for(predictor)
            draft_votes = predictor.predict_draft(draft, campaign, embedder)
            provenance = {
                "model": model,
                "predictor_train": predictor.train_campaign,
                "run_timestamp": run.timestamp,
                "source": "frozen-model",
            }
        elif model in LLM_MODELS:
            draft_votes, provenance = _llm_whatif(state, model, draft, campaign, run)
        else:
            raise HTTPException(status_code=400, detail=[f"unknown model {model!r}"])

        values = run.predictions_for(campaign)
        costs = [p.cost for p in campaign.projects]
        ids = [p.id for p in campaign.projects]
        titles = {p.id: p.title for p in campaign.projects}
        titles["draft"] = draft.title
        aug_values = list(values) + [float(draft_votes)]
        aug_costs = costs + [draft.cost]
        aug_ids = ids + ["draft"]
        order = rank_order(aug_values, aug_costs, aug_ids)
        position = order.index(len(ids))  # 0-based rank of the draft
        rank = position + 1
        n = len(campaign.projects)

        def neighbor(pos: int) -> Optional[dict]:
            if 0 <= pos < len(order):
                idx = order[pos]
                return {
                    "id": aug_ids[idx],
                    "title": titles[aug_ids[idx]],
                    "predicted_votes": aug_values[idx],
                }
            return None

        top_k = {}
        for fraction in TOP_K_FRACTIONS:
            k = max(1, math.floor(fraction * n))
            top_k[f"{int(fraction * 100)}%"] = rank <= k
        funded_ids = greedy_allocate(order, aug_costs, campaign.budget, aug_ids)
        return {
            "predicted_votes": float(draft_votes),
            "rank": rank,
            "n_projects": n,
            "top_k": top_k,
            "funded": "draft" in funded_ids,
            "never_fundable": draft.cost > campaign.budget,
            "budget": campaign.budget,
            "draft_cost": draft.cost,
            "neighbors": {
                "above": neighbor(position - 1),
                "below": neighbor(position + 1),
            },
            "provenance": provenance,
        }

    return app


def _llm_whatif(state: ServiceState, model: str, draft: Project,
                campaign: Campaign, run) -> tuple[float, dict]:
    client = state.chat_client()
    past_key = PAIRINGS.get(campaign.key)
    past = state.campaigns.get(past_key) if past_key else None
    if model != "NC" and past is None:
        raise HTTPException(
            status_code=503,
            detail=f"{model} what-if needs the past campaign {past_key!r} loaded",
        )
    variant = PromptVariant(kind=model, language=campaign.language)
    retrieval = None
    step_back = None
    if model in ("RAG", "RAG_SB"):
        if state.explicit_embedder is None:
            raise HTTPException(
                status_code=503,
                detail=f"{model} what-if needs an embedding provider configured",
            )
        retrieval = retrieve_similar(draft, past, 5, state.explicit_embedder)
        if model == "RAG_SB":
            from .llm.prompts import build_step_back_prompt

            step_back = client.complete(build_step_back_prompt(past, variant)).response
    prompt = build_prompt(variant, draft, campaign, past=past,
                          retrieval=retrieval, step_back_insight=step_back)
    try:
        transcript = client.complete(prompt)
        votes = parse_prediction(transcript.response)
    except ReplayMissError as exc:
        raise HTTPException(
            status_code=503,
            detail=f"{exc}; record this prompt or switch to live mode and retry",
        ) from exc
    except PredictionParseError as exc:
        raise HTTPException(
            status_code=502, detail=f"model returned no parsable prediction: {exc}"
        ) from exc
    except LlmError as exc:
        raise HTTPException(
            status_code=503, detail=f"LLM unavailable: {exc}; retry later"
        ) from exc
    return float(votes), {
        "model": model,
        "run_timestamp": run.timestamp,
        "source": state.llm_config.mode,
    }
