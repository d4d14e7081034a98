"""Reduction-dimension sweep for the classical baselines.

For every candidate dimension the sweep fits the reduction on the
training campaign, fits the requested model, predicts the evaluation
campaign and records the Kendall tau against its real votes.  The best
dimension maximizes tau (ties resolved toward the smaller dimension).

The evaluation campaign's ground truth takes part in the selection; the
caller passes it explicitly, which keeps that data flow visible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .data import Campaign
from .embeddings import Embedder
from .features import build_features, fit_feature_schema, reduce_embedding_block
from .metrics import kendall_tau
from .models import KnnVoteRegressor, PvmRegressor
from .pca import PrincipalComponents

MODEL_KINDS = ("pvm", "knn")


class DimSweepError(Exception):
    """Model fit failed during the sweep; carries the offending dimension."""

    def __init__(self, dim: int, cause: Exception):
        super().__init__(f"dimension {dim}: {cause}")
        self.dim = dim
        self.cause = cause


@dataclass(frozen=True)
class DimSelection:
    model_kind: str
    best_dim: int
    best_tau: float
    table: tuple[tuple[int, float], ...]  # (dim, tau) per candidate


def _fit_predict(model_kind: str, X_train, votes_train, X_eval, total_eval, knn_k, pvm_config):
    if model_kind == "pvm":
        model = PvmRegressor(**(pvm_config or {}))
        model.fit(X_train, votes_train)
        return model.predict(X_eval, total_votes=total_eval)
    model = KnnVoteRegressor(k=knn_k)
    model.fit(X_train, votes_train)
    return model.predict(X_eval)


def select_pca_dim(
    train: Campaign,
    eval_campaign: Campaign,
    model_kind: str,
    dims: Iterable[int],
    embedder: Embedder,
    knn_k: int = 5,
    pvm_config: Optional[dict] = None,
) -> DimSelection:
    """Sweep reduction dimensions and pick the tau-maximizing one."""
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {model_kind!r}")
    dims = sorted(set(int(d) for d in dims))
    if not dims:
        raise ValueError("dims must be non-empty")
    schema = fit_feature_schema(train.projects, embedder)
    raw_train = build_features(train, schema, embedder)
    raw_eval = build_features(eval_campaign, schema, embedder)
    votes_train = np.asarray(train.vote_counts(), dtype=np.float64)
    votes_eval = np.asarray(eval_campaign.vote_counts(), dtype=np.float64)
    bound = min(len(train.projects), schema.embedding_dim)
    for d in dims:
        if not 1 <= d <= bound:
            raise ValueError(f"dimension {d} outside [1, {bound}]")

    rows = []
    for dim in dims:
        try:
            pca = PrincipalComponents(n_components=dim).fit(
                raw_train[:, schema.embedding_slice]
            )
            X_train = reduce_embedding_block(raw_train, schema, pca)
            X_eval = reduce_embedding_block(raw_eval, schema, pca)
            predicted = _fit_predict(
                model_kind,
                X_train,
                votes_train,
                X_eval,
                eval_campaign.total_votes,
                knn_k,
                pvm_config,
            )
            tau = kendall_tau(predicted, votes_eval)
        except Exception as exc:  # keep the dim visible in the failure
            raise DimSweepError(dim, exc) from exc
        rows.append((dim, float(tau)))

    best_dim, best_tau = max(rows, key=lambda item: (item[1], -item[0]))
    return DimSelection(
        model_kind=model_kind,
        best_dim=best_dim,
        best_tau=best_tau,
        table=tuple(rows),
    )
