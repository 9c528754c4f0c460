"""Chat-completion provider contract with record/replay tracing.

Every call is appended to a trace (request, response, timestamp, latency).
Replaying a recorded trace through ReplayProvider reproduces pipeline
outputs byte for byte, which is how the test suite and the CLI's
--mock-trace mode run without a live endpoint.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import httpx

from .errors import FileUnreadable, ProviderExhausted

ENDPOINT_ENV = "CITEDQA_PROVIDER_ENDPOINT"
API_KEY_ENV = "CITEDQA_PROVIDER_KEY"


@dataclass
class ChatRequest:
    op: str
    system: str
    user: str
    temperature: float = 0.0
    seed: int | None = None
    model: str | None = None

    def to_dict(self) -> dict:
        return {
            "op": self.op,
            "system": self.system,
            "user": self.user,
            "temperature": self.temperature,
            "seed": self.seed,
            "model": self.model,
        }

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass
class ProviderReply:
    text: str
    call_id: str


class TraceLog:
    """Append-only provider call log, optionally mirrored to a JSONL file."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.entries: list[dict] = []
        self._lock = threading.Lock()

    def append(self, request: ChatRequest, response_text: str, latency_ms: float) -> str:
        with self._lock:
            call_id = f"call-{len(self.entries) + 1:06d}"
            entry = {
                "call_id": call_id,
                "fingerprint": request.fingerprint(),
                "request": request.to_dict(),
                "response": response_text,
                "timestamp": datetime.now(timezone.utc).isoformat(),
                "latency_ms": round(latency_ms, 3),
            }
            self.entries.append(entry)
            if self.path:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
            return call_id

    @classmethod
    def load(cls, path: str | Path) -> "TraceLog":
        try:
            raw = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise FileUnreadable(str(exc)) from exc
        log = cls()
        for line in raw.splitlines():
            if line.strip():
                log.entries.append(json.loads(line))
        return log


class Provider:
    """Base class: subclasses implement _call(); tracing is shared."""

    def __init__(self, trace: TraceLog | None = None):
        self.trace = trace if trace is not None else TraceLog()

    def complete(self, request: ChatRequest) -> ProviderReply:
        started = time.perf_counter()
        text = self._call(request)
        latency_ms = (time.perf_counter() - started) * 1000.0
        call_id = self.trace.append(request, text, latency_ms)
        return ProviderReply(text=text, call_id=call_id)

    def _call(self, request: ChatRequest) -> str:
        raise NotImplementedError


class HttpChatProvider(Provider):
    """Client for a chat-completion HTTP API.

    POST {"model", "messages", "temperature", "seed"?} and read
    choices[0].message.content. Three attempts with exponential backoff,
    then ProviderExhausted.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout_s: float = 60.0,
        retries: int = 3,
        backoff_s: float = 0.5,
        trace: TraceLog | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        super().__init__(trace)
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s
        self._client = httpx.Client(transport=transport, timeout=timeout_s)
        if not self.endpoint:
            raise ValueError(f"no provider endpoint; set {ENDPOINT_ENV} or pass endpoint=")

    def _call(self, request: ChatRequest) -> str:
        payload: dict = {
            "model": request.model or self.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                response = self._client.post(self.endpoint, json=payload, headers=headers)
                response.raise_for_status()
                return response.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                if attempt < self.retries - 1:
                    time.sleep(self.backoff_s * (2**attempt))
        raise ProviderExhausted(f"{self.endpoint} failed after {self.retries} attempts: {last_error}")


class ScriptedProvider(Provider):
    """Replays a fixed list of responses, or computes one per request.

    With a list, responses are consumed in call order; running out raises
    ProviderExhausted. With a callable, it is invoked per request.
    """

    def __init__(self, script, trace: TraceLog | None = None):
        super().__init__(trace)
        self._lock = threading.Lock()
        if callable(script):
            self._fn = script
            self._queue = None
        else:
            self._fn = None
            self._queue = list(script)
            self._next = 0

    def _call(self, request: ChatRequest) -> str:
        if self._fn is not None:
            return self._fn(request)
        with self._lock:
            if self._next >= len(self._queue):
                raise ProviderExhausted("scripted provider ran out of responses")
            text = self._queue[self._next]
            self._next += 1
        if isinstance(text, Exception):
            raise text
        return text


class ReplayProvider(Provider):
    """Serves recorded responses matched by request fingerprint, FIFO."""

    def __init__(self, source: TraceLog | str | Path, trace: TraceLog | None = None):
        super().__init__(trace)
        log = source if isinstance(source, TraceLog) else TraceLog.load(source)
        self._by_fingerprint: dict[str, list[str]] = {}
        for entry in log.entries:
            self._by_fingerprint.setdefault(entry["fingerprint"], []).append(entry["response"])
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()

    def _call(self, request: ChatRequest) -> str:
        fp = request.fingerprint()
        with self._lock:
            queue = self._by_fingerprint.get(fp)
            pos = self._cursor.get(fp, 0)
            if queue is None or pos >= len(queue):
                raise ProviderExhausted(f"no recorded response for request fingerprint {fp}")
            self._cursor[fp] = pos + 1
            return queue[pos]
