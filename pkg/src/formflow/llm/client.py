"""Chat-completion client with record/replay transcripts.

Requests are keyed by a digest of (model, messages, temperature). Replay
never touches the network; record consults the transcript first so a
resumed run re-uses earlier answers instead of duplicating them.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ReplayMiss, TransportError

logger = logging.getLogger("formflow.llm")

MODES = ("live", "record", "replay")
MAX_ATTEMPTS = 3
BACKOFF_BASE_S = 0.5


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple
    temperature: float = 0.0

    @classmethod
    def make(cls, model: str, messages: list[dict], temperature: float = 0.0):
        frozen = tuple((m["role"], m["content"]) for m in messages)
        return cls(model=model, messages=frozen, temperature=temperature)

    def message_dicts(self) -> list[dict]:
        return [{"role": r, "content": c} for r, c in self.messages]

    def key(self) -> str:
        canon = json.dumps(
            {"model": self.model, "messages": self.message_dicts(),
             "temperature": self.temperature},
            sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class Transcript:
    path: Path
    records: dict[str, dict] = field(default_factory=dict)

    @classmethod
    def load(cls, path: Path) -> "Transcript":
        path = Path(path)
        records: dict[str, dict] = {}
        if path.exists():
            for line in path.read_text("utf-8").splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                records[rec["key"]] = rec
        return cls(path=path, records=records)

    def lookup(self, key: str) -> dict | None:
        return self.records.get(key)

    def append(self, key: str, request: dict, response: str) -> None:
        rec = {"key": key, "request": request, "response": response,
               "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
        self.records[key] = rec
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


class HttpBackend:
    """OpenAI-style chat-completions endpoint over HTTP."""

    def __init__(self, base_url: str, api_key_env: str = "FORMFLOW_API_KEY",
                 timeout_s: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s

    def send(self, request: ChatRequest) -> str:
        import httpx

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": request.model,
            "messages": request.message_dicts(),
            "temperature": request.temperature,
        }
        try:
            resp = httpx.post(f"{self.base_url}/chat/completions",
                              json=body, headers=headers,
                              timeout=self.timeout_s)
        except httpx.HTTPError as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"server returned {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(
                f"request rejected ({resp.status_code}): {resp.text[:200]}",
            )
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"malformed response body: {exc}") from exc


class LlmClient:
    """Mode live sends every request; record stores responses in the
    transcript; replay answers only from it."""

    def __init__(self, backend=None, mode: str = "replay",
                 transcript_path: Path | None = None,
                 sleep=time.sleep):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if mode in ("record", "replay") and transcript_path is None:
            raise ValueError(f"mode {mode!r} requires a transcript path")
        if mode in ("live", "record") and backend is None:
            raise ValueError(f"mode {mode!r} requires a backend")
        self.backend = backend
        self.mode = mode
        self.transcript = (Transcript.load(transcript_path)
                           if transcript_path is not None else None)
        self._sleep = sleep

    def complete(self, request: ChatRequest) -> str:
        key = request.key()
        if self.mode in ("record", "replay"):
            hit = self.transcript.lookup(key)
            if hit is not None:
                return hit["response"]
            if self.mode == "replay":
                raise ReplayMiss(key)
        response = self._send_with_retry(request)
        if self.mode == "record":
            self.transcript.append(key, {
                "model": request.model,
                "messages": request.message_dicts(),
                "temperature": request.temperature,
            }, response)
        return response

    def _send_with_retry(self, request: ChatRequest) -> str:
        last: TransportError | None = None
        for attempt in range(MAX_ATTEMPTS):
            try:
                return self.backend.send(request)
            except TransportError as exc:
                last = exc
                if attempt < MAX_ATTEMPTS - 1:
                    delay = BACKOFF_BASE_S * (2 ** attempt)
                    logger.warning("attempt %d failed (%s); retrying in %.1fs",
                                   attempt + 1, exc, delay)
                    self._sleep(delay)
        raise last
