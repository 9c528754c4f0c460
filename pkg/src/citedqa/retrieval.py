"""Snippet relevance scoring and top-k selection.

The built-in lexical scorer is deterministic and self-contained so the whole
pipeline runs offline; a dense retriever can be plugged in through the HTTP
embedding-scorer contract.
"""

from __future__ import annotations

import json
import math
import re
import threading
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import httpx

from .corpus import Query, Snippet
from .errors import FileUnreadable, MalformedRecord, ScorerUnavailable

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class ScoredSnippet:
    snippet_id: str
    score: float


class LexicalScorer:
    """BM25-style token overlap.

    Pairwise calls use no corpus statistics, so a snippet's score never
    depends on its neighbors. With use_idf=True, top_k() weighs tokens by
    inverse document frequency over the candidate set and applies length
    normalization, which trades that independence for better ranking.
    """

    kind = "lexical"

    def __init__(self, k1: float = 1.5, b: float = 0.75, use_idf: bool = False):
        self.k1 = k1
        self.b = b
        self.use_idf = use_idf

    def score(self, query_text: str, snippet_text: str) -> float:
        q_tokens = tokenize(query_text)
        d_counts = Counter(tokenize(snippet_text))
        total = 0.0
        for t in set(q_tokens):
            tf = d_counts.get(t, 0)
            if tf:
                total += (tf * (self.k1 + 1)) / (tf + self.k1)
        return total

    def score_many(self, query_text: str, snippet_texts: list[str]) -> list[float]:
        if not self.use_idf:
            return [self.score(query_text, t) for t in snippet_texts]
        docs = [tokenize(t) for t in snippet_texts]
        n = len(docs)
        df: Counter = Counter()
        for d in docs:
            df.update(set(d))
        avgdl = (sum(len(d) for d in docs) / n) if n else 1.0
        avgdl = avgdl or 1.0
        q_tokens = set(tokenize(query_text))
        scores = []
        for d in docs:
            counts = Counter(d)
            dl = len(d)
            s = 0.0
            for t in q_tokens:
                tf = counts.get(t, 0)
                if not tf:
                    continue
                idf = math.log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5))
                denom = tf + self.k1 * (1 - self.b + self.b * dl / avgdl)
                s += idf * (tf * (self.k1 + 1)) / denom
            scores.append(s)
        return scores


class EmbeddingScorer:
    """Client for an external embedding relevance service.

    POST {"query": ..., "passages": [...]} -> {"scores": [...]}; cosine
    similarities are returned verbatim. Retries with exponential backoff,
    then raises ScorerUnavailable. A semaphore caps in-flight requests.
    """

    kind = "external_embedding"

    def __init__(
        self,
        endpoint: str,
        timeout_s: float = 30.0,
        retries: int = 3,
        backoff_s: float = 0.5,
        max_in_flight: int = 4,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s
        self._gate = threading.Semaphore(max_in_flight)
        self._client = httpx.Client(transport=transport, timeout=timeout_s)

    def score(self, query_text: str, snippet_text: str) -> float:
        return self.score_many(query_text, [snippet_text])[0]

    def score_many(self, query_text: str, snippet_texts: list[str]) -> list[float]:
        payload = {"query": query_text, "passages": snippet_texts}
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                with self._gate:
                    response = self._client.post(self.endpoint, json=payload)
                response.raise_for_status()
                scores = response.json()["scores"]
                if len(scores) != len(snippet_texts) or not all(
                    isinstance(s, (int, float)) and math.isfinite(s) for s in scores
                ):
                    raise ScorerUnavailable(f"malformed scores from {self.endpoint}")
                return [float(s) for s in scores]
            except ScorerUnavailable:
                raise
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < self.retries - 1:
                    time.sleep(self.backoff_s * (2**attempt))
        raise ScorerUnavailable(f"{self.endpoint} unreachable after {self.retries} attempts: {last_error}")


def score(scorer, query_text: str, snippet_text: str) -> float:
    return scorer.score(query_text, snippet_text)


def top_k(scorer, query: Query, snippets: list[Snippet], k: int = 10) -> list[ScoredSnippet]:
    """Top-k snippets by score, ties broken by snippet id ascending."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = scorer.score_many(query.text, [s.text for s in snippets])
    ranked = sorted(
        (ScoredSnippet(snippet_id=s.id, score=float(sc)) for s, sc in zip(snippets, scores)),
        key=lambda r: (-r.score, r.snippet_id),
    )
    return ranked[:k]


def write_rankings(path: str | Path, rankings: dict[str, list[ScoredSnippet]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query_id, ranked in rankings.items():
            obj = {
                "query_id": query_id,
                "ranked": [{"snippet_id": r.snippet_id, "score": r.score} for r in ranked],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_rankings(path: str | Path) -> dict[str, list[ScoredSnippet]]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(str(exc)) from exc
    rankings: dict[str, list[ScoredSnippet]] = {}
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            rankings[obj["query_id"]] = [
                ScoredSnippet(snippet_id=r["snippet_id"], score=float(r["score"])) for r in obj["ranked"]
            ]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedRecord(line_no, f"bad ranking record: {exc}") from exc
    return rankings
