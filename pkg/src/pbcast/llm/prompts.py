"""Prompt assembly for the four prediction variants, plus response parsing.

Variants, in increasing order of supplied context:

* ``NC``   — no past-election data at all.
* ``RAG``  — summary of the past election plus the most similar past
  projects with their vote counts.
* ``RAG_SB`` — RAG preceded by a step-back stage: the model first derives
  general principles of what makes projects popular in this city, and
  that abstraction is injected into the concrete prompt.
* ``IC``   — the full past project list (title, category, cost, district,
  votes; descriptions omitted to bound prompt size).

All construction is pure and deterministic: identical inputs yield
byte-identical prompts.  Prompts are written in the campaign's language
(French or English).  Every prompt demands a final line of the form
``PREDICTION: <integer>``, which :func:`parse_prediction` extracts.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..data import Campaign, Project
from ..embeddings import Embedder

log = logging.getLogger(__name__)

VARIANTS = ("NC", "RAG", "RAG_SB", "IC")
REASONINGS = ("chain_of_thought", "none")


class PredictionParseError(Exception):
    """Response carries no usable prediction; keeps the full text for audit."""

    def __init__(self, message: str, response: str):
        super().__init__(message)
        self.response = response


@dataclass(frozen=True)
class PromptVariant:
    kind: str = "RAG"
    reasoning: str = "chain_of_thought"
    language: str = "en"

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValueError(f"kind must be one of {VARIANTS}, got {self.kind!r}")
        if self.reasoning not in REASONINGS:
            raise ValueError(
                f"reasoning must be one of {REASONINGS}, got {self.reasoning!r}"
            )


_CURRENCY_DISPLAY = {"EUR": "EUR", "PLN": "zl"}


def format_money(minor_units: int, currency: str) -> str:
    return f"{minor_units // 100} {_CURRENCY_DISPLAY.get(currency, currency)}"


_T = {
    "en": {
        "role": (
            "You are an expert analyst of participatory budgeting elections "
            "and of the city of {city}."
        ),
        "context": (
            "The city of {city} is holding its {year} participatory budgeting "
            "vote. Residents vote for the consolidated projects they want "
            "funded; each voter may support up to {max_approvals} different "
            "projects, and a project can receive at most one vote per voter."
        ),
        "task": (
            "Predict the total number of votes that the following project "
            "will receive in the {year} campaign."
        ),
        "project_header": "Project to evaluate:",
        "title": "Title",
        "description": "Description",
        "category": "Category",
        "cost": "Estimated cost",
        "district": "District",
        "votes": "votes",
        "summary_header": "Summary of the {year} participatory budgeting election in {city}:",
        "summary_projects": "Projects on the ballot",
        "summary_voters": "Participating voters",
        "summary_total": "Total votes cast",
        "summary_budget": "Available budget",
        "summary_quartiles": "Votes per project (quartiles)",
        "summary_category": "Average votes by category",
        "summary_district": "Average votes by district",
        "retrieval_header": (
            "Results of past projects most similar to the project to evaluate:"
        ),
        "ic_header": (
            "Complete list of projects from the {year} campaign with their results:"
        ),
        "insight_header": (
            "General principles about what makes projects succeed in this city:"
        ),
        "cot": (
            "Reason step by step about the public support this project is "
            "likely to attract, considering its category, cost, district and "
            "the appeal of its description, before giving your final answer."
        ),
        "format": (
            "End your answer with one final line in exactly this format:\n"
            "PREDICTION: <integer>\n"
            "where <integer> is the predicted total number of votes."
        ),
        "format_reminder": (
            "Reminder: your answer must end with one final line formatted "
            "exactly as\nPREDICTION: <integer>"
        ),
        "step_back_question": (
            "Before any specific prediction: derive, step by step, the "
            "general principles that explain which participatory budgeting "
            "projects receive many votes in {city}. Summarize the principles "
            "as a short list."
        ),
    },
    "fr": {
        "role": (
            "Vous êtes un expert des budgets participatifs et de la ville de "
            "{city}."
        ),
        "context": (
            "La ville de {city} organise l'édition {year} de son budget "
            "participatif. Les habitants votent pour les projets qu'ils "
            "veulent voir financés ; chaque votant peut soutenir jusqu'à "
            "{max_approvals} projets différents, et un projet ne peut recevoir "
            "qu'un vote par votant."
        ),
        "task": (
            "Prédisez le nombre total de votes que le projet suivant recevra "
            "lors de la campagne {year}."
        ),
        "project_header": "Projet à évaluer :",
        "title": "Titre",
        "description": "Description",
        "category": "Catégorie",
        "cost": "Coût estimé",
        "district": "Quartier",
        "votes": "votes",
        "summary_header": "Résumé de l'édition {year} du budget participatif de {city} :",
        "summary_projects": "Projets soumis au vote",
        "summary_voters": "Votants",
        "summary_total": "Total des votes exprimés",
        "summary_budget": "Budget disponible",
        "summary_quartiles": "Votes par projet (quartiles)",
        "summary_category": "Votes moyens par catégorie",
        "summary_district": "Votes moyens par quartier",
        "retrieval_header": (
            "Résultats des projets passés les plus proches du projet à évaluer :"
        ),
        "ic_header": (
            "Liste complète des projets de la campagne {year} et leurs résultats :"
        ),
        "insight_header": (
            "Principes généraux sur la réussite des projets dans cette ville :"
        ),
        "cot": (
            "Raisonnez étape par étape sur le soutien que ce projet est "
            "susceptible de recueillir, en considérant sa catégorie, son "
            "coût, son quartier et l'attrait de sa description, avant de "
            "donner votre réponse finale."
        ),
        "format": (
            "Terminez votre réponse par une dernière ligne au format exact :\n"
            "PREDICTION: <entier>\n"
            "où <entier> est le nombre total de votes prédits."
        ),
        "format_reminder": (
            "Rappel : votre réponse doit se terminer par une dernière ligne "
            "au format exact\nPREDICTION: <entier>"
        ),
        "step_back_question": (
            "Avant toute prédiction spécifique : dégagez, étape par étape, "
            "les principes généraux qui expliquent quels projets de budget "
            "participatif recueillent beaucoup de votes à {city}. Résumez "
            "ces principes en une courte liste."
        ),
    },
}


def _texts(language: str) -> dict:
    return _T.get(language, _T["en"])


def summarize_past_election(past: Campaign) -> str:
    """Deterministic statistics block describing a finished election."""
    votes = np.asarray(past.vote_counts(), dtype=np.float64)
    t = _texts(past.language)
    q1, q2, q3 = np.percentile(votes, [25, 50, 75])
    lines = [
        t["summary_header"].format(year=past.year, city=past.city),
        f"- {t['summary_projects']}: {len(past.projects)}",
        f"- {t['summary_voters']}: {past.voters}",
        f"- {t['summary_total']}: {past.total_votes}",
        f"- {t['summary_budget']}: {format_money(past.budget, past.currency)}",
        f"- {t['summary_quartiles']}: {q1:.1f} / {q2:.1f} / {q3:.1f}",
    ]
    by_category: dict[str, list[int]] = {}
    by_district: dict[str, list[int]] = {}
    for p in past.projects:
        by_category.setdefault(p.category, []).append(p.votes)
        by_district.setdefault(p.district, []).append(p.votes)
    cat = "; ".join(
        f"{name}: {np.mean(vals):.1f}" for name, vals in sorted(by_category.items())
    )
    dist = "; ".join(
        f"{name}: {np.mean(vals):.1f}" for name, vals in sorted(by_district.items())
    )
    lines.append(f"- {t['summary_category']}: {cat}")
    lines.append(f"- {t['summary_district']}: {dist}")
    return "\n".join(lines)


def retrieve_similar(
    project: Project,
    past: Campaign,
    m: int,
    embedder: Embedder,
) -> list[tuple[Project, float]]:
    """Top-m past projects by cosine similarity of description embeddings.

    Similarity ties keep the past campaign's project order.  Asking for
    more than the past campaign holds returns everything, with a note.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return []
    if m > len(past.projects):
        log.info(
            "retrieval size %d exceeds past campaign size %d; returning all",
            m,
            len(past.projects),
        )
        m = len(past.projects)
    query = embedder.embed(project.description or project.title)
    qnorm = np.linalg.norm(query)
    scored = []
    for i, candidate in enumerate(past.projects):
        vec = embedder.embed(candidate.description or candidate.title)
        denom = qnorm * np.linalg.norm(vec)
        sim = float(query @ vec / denom) if denom > 0 else 0.0
        scored.append((i, sim))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [(past.projects[i], sim) for i, sim in scored[:m]]


def _project_block(project: Project, currency: str, t: dict) -> str:
    return "\n".join(
        [
            t["project_header"],
            f"- {t['title']}: {project.title}",
            f"- {t['description']}: {project.description}",
            f"- {t['category']}: {project.category}",
            f"- {t['cost']}: {format_money(project.cost, currency)}",
            f"- {t['district']}: {project.district}",
        ]
    )


def _past_project_line(index: int, p: Project, currency: str, t: dict) -> str:
    return (
        f"{index}. {p.title} | {t['category']}: {p.category} | "
        f"{t['cost']}: {format_money(p.cost, currency)} | "
        f"{t['district']}: {p.district} | {t['votes']}: {p.votes}"
    )


def build_step_back_prompt(past: Campaign, variant: PromptVariant) -> str:
    """Stage-1 prompt: ask for city-level principles behind past results."""
    t = _texts(variant.language)
    parts = [
        t["role"].format(city=past.city),
        summarize_past_election(past),
        t["step_back_question"].format(city=past.city),
    ]
    return "\n\n".join(parts)


def build_prompt(
    variant: PromptVariant,
    project: Project,
    target: Campaign,
    past: Optional[Campaign] = None,
    retrieval: Optional[Sequence[tuple[Project, float]]] = None,
    step_back_insight: Optional[str] = None,
) -> str:
    """Assemble the full prediction prompt for one project.

    RAG variants require ``past`` and ``retrieval``; IC requires ``past``;
    RAG_SB additionally requires the stage-1 ``step_back_insight``.
    """
    t = _texts(variant.language)
    kind = variant.kind
    if kind in ("RAG", "RAG_SB") and (past is None or retrieval is None):
        raise ValueError(f"{kind} prompts require a past campaign and retrieval results")
    if kind == "RAG_SB" and step_back_insight is None:
        raise ValueError("RAG_SB prompts require the step-back insight text")
    if kind == "IC" and past is None:
        raise ValueError("IC prompts require the past campaign")

    parts = [
        t["role"].format(city=target.city),
        t["context"].format(
            city=target.city, year=target.year, max_approvals=target.max_approvals
        ),
    ]
    if kind == "RAG_SB":
        parts.append(t["insight_header"] + "\n" + step_back_insight.strip())
    if kind in ("RAG", "RAG_SB"):
        parts.append(summarize_past_election(past))
        rendered = [t["retrieval_header"]]
        for i, (p, _sim) in enumerate(retrieval, start=1):
            rendered.append(_past_project_line(i, p, past.currency, t))
        parts.append("\n".join(rendered))
    if kind == "IC":
        rendered = [t["ic_header"].format(year=past.year)]
        for i, p in enumerate(past.projects, start=1):
            rendered.append(_past_project_line(i, p, past.currency, t))
        parts.append("\n".join(rendered))
    parts.append(t["task"].format(year=target.year))
    parts.append(_project_block(project, target.currency, t))
    if variant.reasoning == "chain_of_thought":
        parts.append(t["cot"])
    parts.append(t["format"])
    return "\n\n".join(parts)


def format_reminder(language: str) -> str:
    return _texts(language)["format_reminder"]


_PREDICTION_RE = re.compile(
    r"PREDICTION\s*:\s*(?P<sign>[-+]?)\s*(?P<number>[\d][\d\s  .,']*)",
    re.IGNORECASE,
)


def parse_prediction(response: str) -> int:
    """Extract the integer from the final PREDICTION line.

    Tolerates thousands separators (comma, period, space, apostrophe) and
    decimal fractions (rounded).  Raises PredictionParseError, carrying
    the full response, when nothing usable is found or the value is
    negative.
    """
    matches = list(_PREDICTION_RE.finditer(response or ""))
    if not matches:
        raise PredictionParseError("no PREDICTION line found", response or "")
    match = matches[-1]
    if match.group("sign") == "-":
        raise PredictionParseError("negative prediction", response)
    raw = match.group("number").strip().rstrip(".,'")
    compact = re.sub(r"[\s  ']", "", raw)
    if re.fullmatch(r"\d{1,3}([.,]\d{3})+", compact):
        value = int(re.sub(r"[.,]", "", compact))
    elif re.fullmatch(r"\d+[.,]\d+", compact):
        value = int(round(float(compact.replace(",", "."))))
    elif re.fullmatch(r"\d+", compact):
        value = int(compact)
    else:
        raise PredictionParseError(f"unparseable number {raw!r}", response)
    return value
