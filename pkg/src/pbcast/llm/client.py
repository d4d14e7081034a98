"""Chat-completion client with live, record and replay modes.

Transcripts are content-addressed by a hash of (model, temperature,
prompt).  Record mode persists every live exchange under that key;
replay mode answers exclusively from the store and fails loudly on a
miss — it never falls back to the network, which is what makes full
pipeline runs reproducible in CI.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

log = logging.getLogger(__name__)

MODES = ("live", "record", "replay")
DEFAULT_MODEL = "gpt-4-turbo"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"


class LlmError(Exception):
    pass


class AuthenticationError(LlmError):
    pass


class ReplayMissError(LlmError):
    """Replay store has no transcript for the requested prompt."""

    def __init__(self, key: str):
        super().__init__(f"missing fixture for prompt hash {key}")
        self.key = key


@dataclass(frozen=True)
class LlmConfig:
    """Provider and run settings; temperature defaults to 0 so repeated
    runs of the same prompt are as deterministic as the provider allows."""

    model: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    max_retries: int = 3
    mode: str = "replay"
    endpoint: str = DEFAULT_ENDPOINT
    api_key: Optional[str] = field(default=None, repr=False)
    requests_per_minute: Optional[float] = None
    max_in_flight: int = 4

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class Transcript:
    prompt: str
    response: str
    model: str
    temperature: float
    prompt_tokens: int
    completion_tokens: int
    timestamp: str
    key: str

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "model": self.model,
            "temperature": self.temperature,
            "prompt": self.prompt,
            "response": self.response,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transcript":
        return cls(
            prompt=d["prompt"],
            response=d["response"],
            model=d["model"],
            temperature=d["temperature"],
            prompt_tokens=d["prompt_tokens"],
            completion_tokens=d["completion_tokens"],
            timestamp=d["timestamp"],
            key=d["key"],
        )


def prompt_key(model: str, temperature: float, prompt: str) -> str:
    """Content hash identifying one exchange; the replay lookup key."""
    payload = f"{model}\x00{temperature!r}\x00{prompt}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def estimate_tokens(text: str) -> int:
    """Whitespace-token count; a rough proxy good enough for size checks."""
    return len(text.split())


class TranscriptStore:
    """Content-addressed transcript files: ``<root>/<key[:2]>/<key>.json``."""

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[Transcript]:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            return Transcript.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, KeyError) as exc:
            raise LlmError(f"{path}: corrupt transcript ({exc})") from None

    def put(self, transcript: Transcript) -> Path:
        path = self._path(transcript.key)
        path.parent.mkdir(parents=True, exist_ok=True)
        blob = json.dumps(
            transcript.to_dict(), sort_keys=True, ensure_ascii=False, indent=2
        )
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        tmp.write_text(blob + "\n", encoding="utf-8")
        os.replace(tmp, path)
        return path

    def __len__(self) -> int:
        if not self.root.exists():
            return 0
        return sum(1 for _ in self.root.rglob("*.json"))


class RateLimiter:
    """Serialize request starts to at most N per minute (thread-safe)."""

    def __init__(self, requests_per_minute: float):
        self.interval = 60.0 / requests_per_minute
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self):
        with self._lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + self.interval
        if wait > 0:
            time.sleep(wait)


class ChatClient:
    """One-shot prompt-in/text-out chat client.

    ``transport`` may replace the HTTP layer (tests, scripted fixture
    generation); it receives the request payload dict and returns the
    parsed response body dict.
    """

    def __init__(
        self,
        config: LlmConfig,
        store: Optional[TranscriptStore] = None,
        transport: Optional[Callable[[dict], dict]] = None,
    ):
        if config.mode in ("record", "replay") and store is None:
            raise ValueError(f"{config.mode} mode requires a transcript store")
        self.config = config
        self.store = store
        self.transport = transport
        self.limiter = (
            RateLimiter(config.requests_per_minute)
            if config.requests_per_minute
            else None
        )

    def complete(self, prompt: str) -> Transcript:
        key = prompt_key(self.config.model, self.config.temperature, prompt)
        if self.config.mode == "replay":
            hit = self.store.get(key)
            if hit is None:
                raise ReplayMissError(key)
            return hit
        if self.config.mode == "record":
            hit = self.store.get(key)
            if hit is not None:
                return hit
        transcript = self._call_provider(prompt, key)
        if self.config.mode == "record":
            self.store.put(transcript)
        return transcript

    def _call_provider(self, prompt: str, key: str) -> Transcript:
        if self.limiter is not None:
            self.limiter.acquire()
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        body = (
            self.transport(payload)
            if self.transport is not None
            else self._http_call(payload)
        )
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise LlmError(f"malformed completion response: {exc}") from None
        usage = body.get("usage", {})
        return Transcript(
            prompt=prompt,
            response=text,
            model=self.config.model,
            temperature=self.config.temperature,
            prompt_tokens=int(usage.get("prompt_tokens", estimate_tokens(prompt))),
            completion_tokens=int(
                usage.get("completion_tokens", estimate_tokens(text))
            ),
            timestamp=datetime.now(timezone.utc).isoformat(),
            key=key,
        )

    def _http_call(self, payload: dict) -> dict:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        last_error = None
        for attempt in range(1, self.config.max_retries + 1):
            log.info(
                "chat request model=%s attempt=%d prompt_chars=%d",
                self.config.model,
                attempt,
                len(payload["messages"][0]["content"]),
            )
            try:
                resp = requests.post(
                    self.config.endpoint,
                    json=payload,
                    headers=headers,
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                last_error = f"connection failure: {exc}"
            else:
                if resp.status_code == 200:
                    return resp.json()
                if resp.status_code in (401, 403):
                    raise AuthenticationError(
                        f"HTTP {resp.status_code}: {resp.text[:300]}"
                    )
                if resp.status_code in (429, 500, 502, 503, 504):
                    last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                else:
                    raise LlmError(f"HTTP {resp.status_code}: {resp.text[:300]}")
            if attempt < self.config.max_retries:
                time.sleep(attempt)
        raise LlmError(
            f"chat completion failed after {self.config.max_retries} attempts: {last_error}"
        )
