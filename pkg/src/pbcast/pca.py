"""Principal component analysis with a fixed orientation convention.

Implemented directly on the SVD of the centered data matrix so the
deterministic parts of the contract (component orientation, exact
centering, non-increasing explained variance) hold by construction.
Each component is flipped so its largest-magnitude entry is positive,
which pins an orientation the factorization alone leaves arbitrary.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin


class PrincipalComponents(TransformerMixin, BaseEstimator):
    """Top-``n_components`` principal directions of the training cloud.

    Attributes after fit: ``mean_`` (train centroid), ``components_``
    (rows orthonormal, shape n_components x n_features) and
    ``explained_variance_`` (non-increasing).
    """

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("expected a 2-D matrix of row vectors")
        n, d = X.shape
        if n < 2:
            raise ValueError("need at least 2 training vectors")
        if not np.all(np.isfinite(X)):
            raise ValueError("training vectors contain non-finite entries")
        limit = min(n, d)
        if not 1 <= self.n_components <= limit:
            raise ValueError(
                f"n_components must be in [1, {limit}] for a {n}x{d} matrix, "
                f"got {self.n_components}"
            )
        mean = X.mean(axis=0)
        centered = X - mean
        if not np.any(np.abs(centered) > 1e-12):
            raise ValueError("degenerate data: zero variance in every direction")
        _, singular_values, vt = np.linalg.svd(centered, full_matrices=False)
        components = vt[: self.n_components]
        # orientation convention: largest-magnitude entry of each component > 0
        for row in components:
            pivot = np.argmax(np.abs(row))
            if row[pivot] < 0:
                row *= -1.0
        self.mean_ = mean
        self.components_ = components
        self.explained_variance_ = (singular_values[: self.n_components] ** 2) / (n - 1)
        return self

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        out = (X - self.mean_) @ self.components_.T
        return out[0] if single else out

    def inverse_transform(self, Z) -> np.ndarray:
        self._check_fitted()
        Z = np.asarray(Z, dtype=np.float64)
        single = Z.ndim == 1
        if single:
            Z = Z[None, :]
        out = Z @ self.components_ + self.mean_
        return out[0] if single else out

    def _check_fitted(self):
        if not hasattr(self, "components_"):
            raise RuntimeError("PrincipalComponents is not fitted")


def fit_pca(train_vectors, dim: int) -> PrincipalComponents:
    """Fit a reduction of the given dimension on training row vectors."""
    return PrincipalComponents(n_components=dim).fit(train_vectors)
