"""Frozen end-to-end classical predictors (schema + reduction + model).

A predictor bundles everything needed to turn raw projects into vote
predictions: the fitted feature schema, the optional embedding
reduction, the fitted model and the embedding provider identity.  It
serializes to a single JSON file so the service can load and apply it
without refitting.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import Campaign, Project
from .embeddings import Embedder, HashingEmbedder
from .features import FeatureSchema, build_features, reduce_embedding_block
from .models import (
    KnnVoteRegressor,
    PvmRegressor,
    model_from_dict,
    model_to_dict,
)
from .pca import PrincipalComponents

CLASSICAL_MODELS = ("PVM", "KNN")


@dataclass
class ClassicalPredictor:
    model_id: str
    schema: FeatureSchema
    pca: Optional[PrincipalComponents]
    model: PvmRegressor | KnnVoteRegressor
    train_campaign: str

    def _features(self, projects: Sequence[Project], embedder: Embedder) -> np.ndarray:
        raw = build_features(projects, self.schema, embedder)
        return reduce_embedding_block(raw, self.schema, self.pca)

    def predict_campaign(
        self,
        campaign: Campaign,
        embedder: Embedder,
        total_votes: Optional[float] = None,
    ) -> np.ndarray:
        """Predicted votes for every project of ``campaign``."""
        X = self._features(campaign.projects, embedder)
        if isinstance(self.model, PvmRegressor):
            total = total_votes if total_votes is not None else campaign.total_votes
            return self.model.predict(X, total_votes=total)
        return self.model.predict(X)

    def predict_draft(
        self,
        draft: Project,
        campaign: Campaign,
        embedder: Embedder,
        total_votes: Optional[float] = None,
    ) -> float:
        """Prediction for one draft project in the context of a campaign.

        KNN scores the draft independently; the vote-share model needs a
        project pool, so the draft is scored inside the softmax over the
        campaign's projects plus the draft.
        """
        if isinstance(self.model, KnnVoteRegressor):
            X = self._features([draft], embedder)
            return float(self.model.predict(X)[0])
        pool = list(campaign.projects) + [draft]
        X = self._features(pool, embedder)
        total = total_votes if total_votes is not None else campaign.total_votes
        return float(self.model.predict(X, total_votes=total)[-1])

    def to_dict(self) -> dict:
        payload = {
            "kind": "pbcast-predictor",
            "model_id": self.model_id,
            "train_campaign": self.train_campaign,
            "schema": self.schema.to_dict(),
            "model": model_to_dict(self.model),
        }
        if self.pca is not None:
            payload["pca"] = {
                "mean": self.pca.mean_.tolist(),
                "components": self.pca.components_.tolist(),
                "explained_variance": self.pca.explained_variance_.tolist(),
            }
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "ClassicalPredictor":
        if payload.get("kind") != "pbcast-predictor":
            raise ValueError("not a predictor file")
        pca = None
        if "pca" in payload:
            blob = payload["pca"]
            pca = PrincipalComponents(n_components=len(blob["components"]))
            pca.mean_ = np.asarray(blob["mean"], dtype=np.float64)
            pca.components_ = np.asarray(blob["components"], dtype=np.float64)
            pca.explained_variance_ = np.asarray(
                blob["explained_variance"], dtype=np.float64
            )
        return cls(
            model_id=payload["model_id"],
            schema=FeatureSchema.from_dict(payload["schema"]),
            pca=pca,
            model=model_from_dict(payload["model"]),
            train_campaign=payload["train_campaign"],
        )

    def save(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        return path

    @classmethod
    def load(cls, path: Path | str) -> "ClassicalPredictor":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_classical_predictor(
    model_id: str,
    train: Campaign,
    embedder: Embedder,
    pca_dim: Optional[int] = None,
    knn_k: int = 5,
    pvm_config: Optional[dict] = None,
) -> ClassicalPredictor:
    """Fit schema, reduction and model on a training campaign."""
    model_id = model_id.upper()
    if model_id not in CLASSICAL_MODELS:
        raise ValueError(f"model_id must be one of {CLASSICAL_MODELS}, got {model_id!r}")
    from .features import fit_feature_schema

    schema = fit_feature_schema(train.projects, embedder)
    raw = build_features(train.projects, schema, embedder)
    pca = None
    if pca_dim is not None:
        pca = PrincipalComponents(n_components=pca_dim).fit(
            raw[:, schema.embedding_slice]
        )
    X = reduce_embedding_block(raw, schema, pca)
    votes = np.asarray(train.vote_counts(), dtype=np.float64)
    if model_id == "PVM":
        model = PvmRegressor(**(pvm_config or {})).fit(X, votes)
    else:
        model = KnnVoteRegressor(k=knn_k).fit(X, votes)
    return ClassicalPredictor(
        model_id=model_id,
        schema=schema,
        pca=pca,
        model=model,
        train_campaign=train.key,
    )


def embedder_from_provider_id(provider_id: str) -> Embedder:
    """Rebuild the offline embedder from its identity string.

    HTTP providers cannot be reconstructed from the id alone; callers
    must supply the client themselves in that case.
    """
    match = re.fullmatch(r"hashing-v1-d(\d+)-n([\d.]+)", provider_id)
    if match is None:
        raise ValueError(
            f"cannot reconstruct embedder for provider {provider_id!r}; "
            "pass an embedder explicitly"
        )
    dims = int(match.group(1))
    ngrams = tuple(int(x) for x in match.group(2).split("."))
    return HashingEmbedder(dim=dims, ngram_sizes=ngrams)
