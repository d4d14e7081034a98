"""Embedding providers and the binary vector cache."""

import numpy as np
import pytest

from pbcast.embeddings import (
    CachingEmbedder,
    EmbeddingCache,
    EmbeddingError,
    HashingEmbedder,
    HttpEmbeddingClient,
    cache_key,
)


class TestHashingEmbedder:
    def test_deterministic(self):
        e = HashingEmbedder(dim=64)
        a = e.embed("new park with benches")
        b = e.embed("new park with benches")
        assert a.tobytes() == b.tobytes()

    def test_different_texts_differ(self):
        e = HashingEmbedder(dim=64)
        assert not np.array_equal(e.embed("park"), e.embed("pool"))

    def test_unit_norm(self):
        e = HashingEmbedder(dim=256)
        for text in ("park", "a longer text about a swimming pool renovation", "x y z"):
            assert abs(np.linalg.norm(e.embed(text)) - 1.0) < 1e-9

    def test_empty_text_rejected(self):
        e = HashingEmbedder(dim=64)
        with pytest.raises(ValueError):
            e.embed("")
        with pytest.raises(ValueError):
            e.embed("   ")

    def test_token_overlap_raises_similarity(self):
        e = HashingEmbedder(dim=256)
        base = e.embed("renovate the playground near the school")
        close = e.embed("renovate the playground near the market")
        far = e.embed("asphalt resurfacing on industrial access road")
        assert float(base @ close) > float(base @ far)

    def test_dim_validation(self):
        with pytest.raises(ValueError):
            HashingEmbedder(dim=1)


class TestCache:
    def test_put_get_bitwise(self, tmp_path):
        cache = EmbeddingCache(tmp_path)
        vec = np.arange(8, dtype=np.float32) / 7
        key = cache_key("prov", "text")
        cache.put(key, vec)
        out = cache.get(key)
        assert out.dtype == np.float32
        assert out.tobytes() == vec.tobytes()

    def test_get_missing_is_none(self, tmp_path):
        assert EmbeddingCache(tmp_path).get("ab" * 32) is None

    def test_corrupt_entry_raises(self, tmp_path):
        cache = EmbeddingCache(tmp_path)
        key = cache_key("prov", "text")
        cache.put(key, np.ones(4, dtype=np.float32))
        path = tmp_path / key[:2] / f"{key}.vec"
        path.write_bytes(b"garbage")
        with pytest.raises(EmbeddingError):
            cache.get(key)

    def test_caching_embedder_hit_is_identical(self, tmp_path):
        calls = []

        class Counting(HashingEmbedder):
            def embed(self, text):
                calls.append(text)
                return super().embed(text)

        embedder = CachingEmbedder(Counting(dim=32), EmbeddingCache(tmp_path))
        first = embedder.embed("park")
        second = embedder.embed("park")
        assert calls == ["park"]  # second call served from disk
        assert first.tobytes() == second.tobytes()

    def test_embed_many_preserves_order(self, tmp_path):
        embedder = CachingEmbedder(HashingEmbedder(dim=32), EmbeddingCache(tmp_path))
        texts = [f"text number {i}" for i in range(20)]
        batch = embedder.embed_many(texts)
        solo = np.stack(
            [HashingEmbedder(dim=32).embed(t).astype(np.float32) for t in texts]
        )
        assert np.array_equal(batch, solo)


class FakeResponse:
    def __init__(self, status_code, body=None, text=""):
        self.status_code = status_code
        self._body = body
        self.text = text

    def json(self):
        return self._body


class TestHttpClient:
    def make(self, **kwargs):
        return HttpEmbeddingClient(
            endpoint="https://example.test/embeddings",
            model="embedder-1",
            dim=4,
            api_key="secret",
            max_retries=3,
            backoff=0.0,
            **kwargs,
        )

    def test_success(self, monkeypatch):
        def fake_post(url, json=None, headers=None, timeout=None):
            assert headers["Authorization"] == "Bearer secret"
            return FakeResponse(200, {"data": [{"embedding": [1, 2, 3, 4]}]})

        monkeypatch.setattr("requests.post", fake_post)
        vec = self.make().embed("hello")
        assert vec.tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_retries_then_succeeds(self, monkeypatch):
        attempts = []

        def fake_post(url, json=None, headers=None, timeout=None):
            attempts.append(1)
            if len(attempts) < 3:
                return FakeResponse(503, text="overloaded")
            return FakeResponse(200, {"data": [{"embedding": [0, 0, 0, 1]}]})

        monkeypatch.setattr("requests.post", fake_post)
        assert self.make().embed("hello")[3] == 1.0
        assert len(attempts) == 3

    def test_exhausted_retries_raise(self, monkeypatch):
        monkeypatch.setattr(
            "requests.post", lambda *a, **k: FakeResponse(500, text="boom")
        )
        with pytest.raises(EmbeddingError, match="after 3 attempts"):
            self.make().embed("hello")

    def test_client_error_is_not_retried(self, monkeypatch):
        attempts = []

        def fake_post(*a, **k):
            attempts.append(1)
            return FakeResponse(400, text="bad request")

        monkeypatch.setattr("requests.post", fake_post)
        with pytest.raises(EmbeddingError, match="rejected"):
            self.make().embed("hello")
        assert len(attempts) == 1

    def test_dim_mismatch(self, monkeypatch):
        monkeypatch.setattr(
            "requests.post",
            lambda *a, **k: FakeResponse(200, {"data": [{"embedding": [1, 2]}]}),
        )
        with pytest.raises(EmbeddingError, match="dim"):
            self.make().embed("hello")

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            self.make().embed(" ")
