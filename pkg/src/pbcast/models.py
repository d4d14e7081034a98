"""Classical vote-prediction baselines.

* :class:`PvmRegressor` — probabilistic voting model.  Each project gets
  a linear score s_i = w . x_i; the chance that a single approval lands
  on project i is softmax(s)_i, and the campaign's total approvals T
  spread as expected votes T * p_i.  Weights maximize the multinomial
  log-likelihood sum_i n_i log p_i(w), which is concave, via full-batch
  gradient ascent with Armijo backtracking from a zero start.
* :class:`KnnVoteRegressor` — mean vote count of the k nearest training
  projects in Euclidean distance, distance ties broken by training index.

Both expose the sklearn estimator protocol (fit/predict/get_params) so
they compose with the usual tooling.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

log = logging.getLogger(__name__)


def _check_matrix(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def pvm_probabilities(weights, features) -> np.ndarray:
    """Softmax of per-project scores, computed with max-subtraction.

    Output is a strictly positive vector summing to 1 (within 1e-12).
    """
    X = _check_matrix(features, "features")
    w = np.asarray(weights, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise ValueError("weights contain non-finite entries")
    if w.shape != (X.shape[1],):
        raise ValueError(f"weight dim {w.shape} does not match features {X.shape}")
    scores = X @ w
    shifted = scores - scores.max()
    expd = np.exp(shifted)
    return expd / expd.sum()


@dataclass(frozen=True)
class FitDiagnostics:
    log_likelihood: float
    iterations: int
    grad_norm: float
    converged: bool
    history: tuple[float, ...] = field(repr=False, default=())


class PvmRegressor(RegressorMixin, BaseEstimator):
    """Softmax vote-share model fitted by maximum likelihood.

    ``l2`` adds an optional ridge penalty (off by default).  ``total_votes``
    may be set up front or passed to :meth:`predict`; it is the evaluation
    campaign's total approval count and scales probabilities into votes.
    """

    def __init__(
        self,
        l2: float = 0.0,
        tol: float = 1e-6,
        max_iter: int = 5000,
        total_votes: Optional[float] = None,
    ):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.total_votes = total_votes

    def _objective(self, w, X, votes, total):
        scores = X @ w
        m = scores.max()
        logz = m + np.log(np.exp(scores - m).sum())
        loglik = float(votes @ scores - total * logz)
        if self.l2:
            loglik -= 0.5 * self.l2 * float(w @ w)
        return loglik

    def _gradient(self, w, X, votes, total):
        scores = X @ w
        shifted = scores - scores.max()
        expd = np.exp(shifted)
        p = expd / expd.sum()
        grad = X.T @ votes - total * (X.T @ p)
        if self.l2:
            grad = grad - self.l2 * w
        return grad

    def fit(self, X, y):
        X = _check_matrix(X)
        votes = np.asarray(y, dtype=np.float64)
        if votes.shape != (X.shape[0],):
            raise ValueError("votes must align with feature rows")
        if X.shape[0] < 2:
            raise ValueError("need at least 2 projects to fit")
        if np.any(votes < 0):
            raise ValueError("votes must be non-negative")
        total = votes.sum()
        if total <= 0:
            raise ValueError("votes must not be all zero")

        w = np.zeros(X.shape[1])
        loglik = self._objective(w, X, votes, total)
        history = [loglik]
        step = 1.0
        converged = False
        iterations = 0
        grad = self._gradient(w, X, votes, total)
        for iterations in range(1, self.max_iter + 1):
            grad_norm = float(np.abs(grad).max())
            if grad_norm < self.tol:
                converged = True
                iterations -= 1
                break
            # Armijo backtracking along the gradient; objective is concave,
            # so accepted steps never decrease the likelihood.
            direction = grad
            slope = float(grad @ direction)
            step = min(step * 2.0, 1e6)
            while True:
                candidate = w + step * direction
                value = self._objective(candidate, X, votes, total)
                if np.isnan(value):
                    raise FloatingPointError("log-likelihood became NaN during fit")
                if value >= loglik + 1e-4 * step * slope:
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            if step < 1e-14:
                break
            w = candidate
            loglik = value
            history.append(loglik)
            grad = self._gradient(w, X, votes, total)
        grad_norm = float(np.abs(grad).max())
        converged = converged or grad_norm < self.tol
        if not converged:
            warnings.warn(
                f"PVM fit stopped after {iterations} iterations with "
                f"max|grad| = {grad_norm:.3g} (tol {self.tol:.3g}); "
                "returning best iterate",
                RuntimeWarning,
                stacklevel=2,
            )
        self.coef_ = w
        self.diagnostics_ = FitDiagnostics(
            log_likelihood=loglik,
            iterations=iterations,
            grad_norm=grad_norm,
            converged=converged,
            history=tuple(history),
        )
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        return pvm_probabilities(self.coef_, X)

    def predict(self, X, total_votes: Optional[float] = None) -> np.ndarray:
        """Expected votes per project: T * softmax(scores)."""
        self._check_fitted()
        total = self.total_votes if total_votes is None else total_votes
        if total is None or total <= 0:
            raise ValueError("total_votes must be positive (set it or pass it)")
        return total * self.predict_proba(X)

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise RuntimeError("PvmRegressor is not fitted")


class KnnVoteRegressor(RegressorMixin, BaseEstimator):
    """Average votes of the k nearest training projects (Euclidean)."""

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y):
        X = _check_matrix(X)
        votes = np.asarray(y, dtype=np.float64)
        if votes.shape != (X.shape[0],):
            raise ValueError("votes must align with feature rows")
        if not 1 <= self.k <= X.shape[0]:
            raise ValueError(f"k must be in [1, {X.shape[0]}], got {self.k}")
        self.train_X_ = X
        self.train_votes_ = votes
        return self

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = _check_matrix(X)
        if X.shape[1] != self.train_X_.shape[1]:
            raise ValueError("feature dimension mismatch with training data")
        # squared Euclidean distances; stable argsort breaks distance ties
        # by training index order
        sq = (
            np.sum(X**2, axis=1)[:, None]
            + np.sum(self.train_X_**2, axis=1)[None, :]
            - 2.0 * (X @ self.train_X_.T)
        )
        order = np.argsort(sq, axis=1, kind="stable")
        neighbors = order[:, : self.k]
        return self.train_votes_[neighbors].mean(axis=1)

    def _check_fitted(self):
        if not hasattr(self, "train_X_"):
            raise RuntimeError("KnnVoteRegressor is not fitted")


def fit_pvm(X, y, **config) -> PvmRegressor:
    """Functional facade over :class:`PvmRegressor`."""
    return PvmRegressor(**config).fit(X, y)


def predict_pvm(model: PvmRegressor, X, total_votes: float) -> np.ndarray:
    return model.predict(X, total_votes=total_votes)


def predict_knn(model: KnnVoteRegressor, X) -> np.ndarray:
    return model.predict(X)


def model_to_dict(model) -> dict:
    """JSON-ready snapshot of a fitted model (weights or training set)."""
    if isinstance(model, PvmRegressor):
        model._check_fitted()
        d = model.diagnostics_
        return {
            "kind": "pvm",
            "params": {"l2": model.l2, "tol": model.tol, "max_iter": model.max_iter},
            "weights": model.coef_.tolist(),
            "diagnostics": {
                "log_likelihood": d.log_likelihood,
                "iterations": d.iterations,
                "grad_norm": d.grad_norm,
                "converged": d.converged,
            },
        }
    if isinstance(model, KnnVoteRegressor):
        model._check_fitted()
        return {
            "kind": "knn",
            "params": {"k": model.k},
            "train_features": model.train_X_.tolist(),
            "train_votes": model.train_votes_.tolist(),
        }
    raise TypeError(f"unsupported model type {type(model).__name__}")


def model_from_dict(payload: dict):
    kind = payload.get("kind")
    if kind == "pvm":
        model = PvmRegressor(**payload.get("params", {}))
        model.coef_ = np.asarray(payload["weights"], dtype=np.float64)
        diag = payload.get("diagnostics", {})
        model.diagnostics_ = FitDiagnostics(
            log_likelihood=diag.get("log_likelihood", float("nan")),
            iterations=diag.get("iterations", 0),
            grad_norm=diag.get("grad_norm", float("nan")),
            converged=diag.get("converged", True),
        )
        return model
    if kind == "knn":
        model = KnnVoteRegressor(**payload.get("params", {}))
        model.train_X_ = np.asarray(payload["train_features"], dtype=np.float64)
        model.train_votes_ = np.asarray(payload["train_votes"], dtype=np.float64)
        return model
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path: Path | str, extra: Optional[dict] = None) -> Path:
    path = Path(path)
    payload = model_to_dict(model)
    if extra:
        payload.update(extra)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    return path


def load_model(path: Path | str):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
