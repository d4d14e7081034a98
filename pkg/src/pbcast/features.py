"""Per-project feature vectors: structural attributes plus a text embedding.

The raw layout is ``[one-hot category | one-hot district | z-scored cost |
description embedding]``.  Vocabularies and cost statistics are fitted on
the training campaign and frozen; labels unseen at transform time map to
an explicit "other" slot.  Dimensionality reduction applies to the
embedding block only — structural features pass through untouched — since
the embedding is the only high-dimensional block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import Campaign, Project
from .embeddings import Embedder
from .pca import PrincipalComponents

log = logging.getLogger(__name__)

OTHER = "__other__"


@dataclass(frozen=True)
class FeatureSchema:
    """Frozen encoding plan fitted on a training campaign."""

    categories: tuple[str, ...]  # ordered, ends with the OTHER slot
    districts: tuple[str, ...]
    cost_mean: float
    cost_std: float
    embedding_dim: int
    provider_id: str

    @property
    def length(self) -> int:
        return len(self.categories) + len(self.districts) + 1 + self.embedding_dim

    @property
    def structural_length(self) -> int:
        return len(self.categories) + len(self.districts) + 1

    @property
    def embedding_slice(self) -> slice:
        return slice(self.structural_length, self.length)

    def to_dict(self) -> dict:
        return {
            "categories": list(self.categories),
            "districts": list(self.districts),
            "cost_mean": self.cost_mean,
            "cost_std": self.cost_std,
            "embedding_dim": self.embedding_dim,
            "provider_id": self.provider_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(
            categories=tuple(d["categories"]),
            districts=tuple(d["districts"]),
            cost_mean=d["cost_mean"],
            cost_std=d["cost_std"],
            embedding_dim=d["embedding_dim"],
            provider_id=d["provider_id"],
        )


def fit_feature_schema(projects: Sequence[Project], embedder: Embedder) -> FeatureSchema:
    """Learn vocabularies and cost statistics from training projects."""
    if not projects:
        raise ValueError("cannot fit a schema on zero projects")
    categories = tuple(sorted({p.category for p in projects})) + (OTHER,)
    districts = tuple(sorted({p.district for p in projects})) + (OTHER,)
    costs = np.asarray([p.cost for p in projects], dtype=np.float64)
    std = float(costs.std())
    return FeatureSchema(
        categories=categories,
        districts=districts,
        cost_mean=float(costs.mean()),
        cost_std=std if std > 0 else 1.0,
        embedding_dim=embedder.dim,
        provider_id=embedder.provider_id,
    )


def _one_hot(label: str, vocabulary: tuple[str, ...], what: str) -> np.ndarray:
    vec = np.zeros(len(vocabulary))
    if label in vocabulary:
        vec[vocabulary.index(label)] = 1.0
    else:
        log.info("unseen %s %r mapped to the other slot", what, label)
        vec[-1] = 1.0
    return vec


def build_features(
    source: Campaign | Sequence[Project],
    schema: FeatureSchema,
    embedder: Embedder,
) -> np.ndarray:
    """Raw feature matrix, one row per project, length = ``schema.length``."""
    projects = source.projects if isinstance(source, Campaign) else tuple(source)
    if embedder.provider_id != schema.provider_id:
        raise ValueError(
            f"embedder {embedder.provider_id!r} does not match schema "
            f"provider {schema.provider_id!r}"
        )
    rows = []
    for p in projects:
        structural = np.concatenate(
            [
                _one_hot(p.category, schema.categories, "category"),
                _one_hot(p.district, schema.districts, "district"),
                [(p.cost - schema.cost_mean) / schema.cost_std],
            ]
        )
        embedding = embedder.embed(p.description or p.title)
        rows.append(np.concatenate([structural, embedding]))
    matrix = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("feature matrix contains non-finite entries")
    return matrix


def reduce_embedding_block(
    features: np.ndarray, schema: FeatureSchema, pca: Optional[PrincipalComponents]
) -> np.ndarray:
    """Replace the embedding block with its principal components."""
    if pca is None:
        return features
    structural = features[:, : schema.structural_length]
    reduced = pca.transform(features[:, schema.embedding_slice])
    return np.hstack([structural, reduced])


class ProjectVectorizer(TransformerMixin, BaseEstimator):
    """Estimator wrapper: fit a schema (and optional reduction) on training
    projects, then transform any project list into model-ready vectors.

    ``pca_dim=None`` keeps the full embedding block.
    """

    def __init__(self, embedder: Embedder, pca_dim: Optional[int] = None):
        self.embedder = embedder
        self.pca_dim = pca_dim

    def fit(self, projects: Campaign | Sequence[Project], y=None):
        items = projects.projects if isinstance(projects, Campaign) else tuple(projects)
        self.schema_ = fit_feature_schema(items, self.embedder)
        raw = build_features(items, self.schema_, self.embedder)
        if self.pca_dim is not None:
            self.pca_ = PrincipalComponents(n_components=self.pca_dim).fit(
                raw[:, self.schema_.embedding_slice]
            )
        else:
            self.pca_ = None
        return self

    def transform(self, projects: Campaign | Sequence[Project]) -> np.ndarray:
        if not hasattr(self, "schema_"):
            raise RuntimeError("ProjectVectorizer is not fitted")
        raw = build_features(projects, self.schema_, self.embedder)
        return reduce_embedding_block(raw, self.schema_, self.pca_)

    def transform_one(self, project: Project) -> np.ndarray:
        return self.transform([project])[0]
