"""Prior-exposure probes: can the model reproduce dataset content it was
never given?

Two tests, mirroring the dataset-release checks run before trusting the
prediction results:

* description completion — ask for a project's full official description
  given only its title (or the title plus the first lines) and compare
  the generation with the real text, lexically (3-gram overlap) and
  semantically (embedding cosine).
* attribute retrieval — give title and description, ask for the district
  and the estimated cost.

Verdict thresholds are fixed here: 3-gram overlap above 0.5 or cosine
above 0.95 flags completion; exact district plus cost within 10% flags
retrieval.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data import Project
from ..embeddings import Embedder
from .client import ChatClient

NGRAM_SIZE = 3
LEXICAL_THRESHOLD = 0.5
SEMANTIC_THRESHOLD = 0.95
COST_TOLERANCE = 0.10

COMPLETION_MODES = ("title_only", "prefix")


@dataclass(frozen=True)
class ContaminationReport:
    probe: str
    project_id: str
    generated: str
    lexical_overlap: Optional[float] = None
    semantic_similarity: Optional[float] = None
    district_match: Optional[bool] = None
    cost_relative_error: Optional[float] = None
    contaminated: bool = False

    @property
    def verdict(self) -> str:
        return "contaminated" if self.contaminated else "clean"


def _ngrams(text: str, n: int) -> set[tuple[str, ...]]:
    tokens = [t.lower() for t in re.findall(r"\w+", text, re.UNICODE)]
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def ngram_overlap(generated: str, reference: str, n: int = NGRAM_SIZE) -> float:
    """Fraction of the reference's n-grams found in the generation."""
    ref = _ngrams(reference, n)
    if not ref:
        return 0.0
    gen = _ngrams(generated, n)
    return len(gen & ref) / len(ref)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    return float(a @ b / denom) if denom > 0 else 0.0


def probe_description_completion(
    project: Project,
    client: ChatClient,
    embedder: Embedder,
    mode: str = "title_only",
    prefix_lines: int = 2,
) -> ContaminationReport:
    """Ask the model to produce the project's full official description."""
    if mode not in COMPLETION_MODES:
        raise ValueError(f"mode must be one of {COMPLETION_MODES}, got {mode!r}")
    parts = [
        "You are asked to reproduce, word for word, the official public "
        "description of a participatory budgeting project, exactly as it "
        "was published.",
        f"Project title: {project.title}",
    ]
    if mode == "prefix":
        sentences = re.split(r"(?<=[.!?])\s+", project.description.strip())
        prefix = " ".join(sentences[:prefix_lines])
        parts.append(f"The description begins: {prefix}")
        parts.append("Continue and give the complete original description.")
    else:
        parts.append("Write the complete original description of this project.")
    transcript = client.complete("\n\n".join(parts))
    generated = transcript.response.strip()

    overlap = ngram_overlap(generated, project.description)
    if generated and project.description.strip():
        similarity = _cosine(embedder.embed(generated), embedder.embed(project.description))
    else:
        similarity = 0.0
    contaminated = overlap > LEXICAL_THRESHOLD or similarity > SEMANTIC_THRESHOLD
    return ContaminationReport(
        probe=f"description_completion[{mode}]",
        project_id=project.id,
        generated=generated,
        lexical_overlap=overlap,
        semantic_similarity=similarity,
        contaminated=contaminated,
    )


_DISTRICT_RE = re.compile(r"DISTRICT\s*:\s*(?P<value>.+)", re.IGNORECASE)
_COST_RE = re.compile(r"COST\s*:\s*(?P<value>[\d\s .,']+)", re.IGNORECASE)


def _normalize_label(label: str) -> str:
    return re.sub(r"\s+", " ", label).strip().lower()


def probe_attribute_retrieval(project: Project, client: ChatClient) -> ContaminationReport:
    """Given title and description, ask for the district and the cost."""
    prompt = "\n\n".join(
        [
            "A participatory budgeting project is described below. From your "
            "own knowledge of this real project, state the district where it "
            "was submitted and its estimated cost.",
            f"Title: {project.title}",
            f"Description: {project.description}",
            "Answer with exactly two lines:\nDISTRICT: <name>\nCOST: <amount>",
        ]
    )
    transcript = client.complete(prompt)
    response = transcript.response

    district_match = False
    district = _DISTRICT_RE.search(response)
    if district is not None:
        district_match = _normalize_label(district.group("value")) == _normalize_label(
            project.district
        )

    cost_error: Optional[float] = None
    cost = _COST_RE.search(response)
    if cost is not None:
        compact = re.sub(r"[\s ']", "", cost.group("value")).rstrip(".,")
        compact = re.sub(r"[.,](?=\d{3}\b)", "", compact)
        try:
            answered = float(compact.replace(",", "."))
            # probes quote costs in major units
            cost_error = abs(answered - project.cost / 100) / (project.cost / 100)
        except ValueError:
            cost_error = None

    contaminated = district_match and cost_error is not None and cost_error <= COST_TOLERANCE
    return ContaminationReport(
        probe="attribute_retrieval",
        project_id=project.id,
        generated=response,
        district_match=district_match,
        cost_relative_error=cost_error,
        contaminated=contaminated,
    )
