"""Text embedding providers and the on-disk vector cache.

Two providers share one interface (``dim``, ``provider_id``, ``embed``):

* :class:`HashingEmbedder` — deterministic offline fallback: token
  n-grams feature-hashed into a fixed-length unit vector.  Used by tests
  and by any run that must be reproducible without network access.
* :class:`HttpEmbeddingClient` — JSON-over-HTTP client for hosted
  embedding endpoints (request shape ``{"model": ..., "input": [...]}``).

Vectors are cached on disk keyed by a content hash of (provider, text),
so repeated calls are free and runs replay offline.  Cache files hold
little-endian float32 data behind a 10-byte header; writes go through a
temp file and an atomic rename.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

log = logging.getLogger(__name__)

_MAGIC = b"PBEV"
_VERSION = 1
_HEADER = struct.Struct("<4sHI")  # magic, version, dim


class EmbeddingError(Exception):
    """Provider failed after bounded retries; safe to retry later."""


class Embedder(Protocol):
    dim: int
    provider_id: str

    def embed(self, text: str) -> np.ndarray: ...


_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class HashingEmbedder:
    """Feature-hashing embedder over token n-grams, unit-normalized.

    Deterministic across processes and platforms (hashing via sha256, not
    the salted builtin hash).  Not a semantic model: it only guarantees
    that equal texts embed identically and that token overlap raises
    cosine similarity, which is what offline tests need.
    """

    def __init__(self, dim: int = 256, ngram_sizes: Sequence[int] = (1, 2)):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self.ngram_sizes = tuple(ngram_sizes)
        self.provider_id = f"hashing-v1-d{dim}-n{'.'.join(map(str, self.ngram_sizes))}"

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        tokens = [t.lower() for t in _TOKEN_RE.findall(text)]
        vec = np.zeros(self.dim, dtype=np.float64)
        for n in self.ngram_sizes:
            for i in range(len(tokens) - n + 1):
                gram = " ".join(tokens[i : i + n])
                digest = hashlib.sha256(gram.encode("utf-8")).digest()
                bucket = int.from_bytes(digest[:4], "little") % self.dim
                sign = 1.0 if digest[4] % 2 == 0 else -1.0
                vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            # all-sign-cancelled pathological input: fall back to a one-hot
            vec[0] = 1.0
            norm = 1.0
        return vec / norm


class HttpEmbeddingClient:
    """Client for an OpenAI-style ``/embeddings`` JSON endpoint.

    Retries transient failures (connection errors, 429, 5xx) with linear
    backoff, then raises EmbeddingError.  Request/response metadata is
    logged with the API key redacted.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        dim: int,
        api_key: Optional[str] = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 1.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.provider_id = f"http-{model}"

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "input": [text]}
        last_error: Optional[str] = None
        for attempt in range(1, self.max_retries + 1):
            try:
                log.info(
                    "embedding request model=%s chars=%d attempt=%d auth=%s",
                    self.model,
                    len(text),
                    attempt,
                    "redacted" if self.api_key else "none",
                )
                resp = requests.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"connection failure: {exc}"
            else:
                if resp.status_code == 200:
                    body = resp.json()
                    vec = np.asarray(body["data"][0]["embedding"], dtype=np.float64)
                    if vec.shape != (self.dim,):
                        raise EmbeddingError(
                            f"provider returned dim {vec.shape[0]}, expected {self.dim}"
                        )
                    return vec
                if resp.status_code in (429, 500, 502, 503, 504):
                    last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                else:
                    raise EmbeddingError(
                        f"embedding request rejected: HTTP {resp.status_code}: {resp.text[:200]}"
                    )
            if attempt < self.max_retries:
                time.sleep(self.backoff * attempt)
        raise EmbeddingError(
            f"embedding failed after {self.max_retries} attempts: {last_error}"
        )


def cache_key(provider_id: str, text: str) -> str:
    payload = provider_id.encode("utf-8") + b"\x00" + text.encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


class EmbeddingCache:
    """Content-addressed vector files: ``<root>/<key[:2]>/<key>.vec``."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.vec"

    def get(self, key: str) -> Optional[np.ndarray]:
        path = self._path(key)
        if not path.exists():
            return None
        blob = path.read_bytes()
        if len(blob) < _HEADER.size:
            raise EmbeddingError(f"{path}: truncated cache entry")
        magic, version, dim = _HEADER.unpack_from(blob)
        if magic != _MAGIC or version != _VERSION:
            raise EmbeddingError(f"{path}: unrecognized cache entry header")
        data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
        if data.shape[0] != dim:
            raise EmbeddingError(f"{path}: expected {dim} floats, found {data.shape[0]}")
        return data.copy()

    def put(self, key: str, vector: np.ndarray) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        vec = np.ascontiguousarray(vector, dtype="<f4")
        blob = _HEADER.pack(_MAGIC, _VERSION, vec.shape[0]) + vec.tobytes()
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        tmp.write_bytes(blob)
        os.replace(tmp, path)


class CachingEmbedder:
    """Wrap a provider with the disk cache; batch calls run concurrently."""

    def __init__(self, provider: Embedder, cache: EmbeddingCache, max_in_flight: int = 8):
        self.provider = provider
        self.cache = cache
        self.max_in_flight = max_in_flight

    @property
    def dim(self) -> int:
        return self.provider.dim

    @property
    def provider_id(self) -> str:
        return self.provider.provider_id

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        key = cache_key(self.provider.provider_id, text)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        vec = self.provider.embed(text)
        self.cache.put(key, vec)
        # hand back the float32 round-trip so hits and misses are bitwise equal
        return np.asarray(vec, dtype="<f4").copy()

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        """Embed a batch, preserving input order, capped concurrency."""
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float32)
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            vectors = list(pool.map(self.embed, texts))
        return np.stack(vectors)


def embed_text(text: str, embedder: Embedder) -> np.ndarray:
    """Embed one text with any provider (module-level convenience)."""
    return embedder.embed(text)
