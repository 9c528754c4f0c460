"""Queries, source documents, and snippet chunking.

A corpus is a query file plus a snippet store, both JSON-lines. Retrieved
snippets are carved out of scraped documents; gold snippets arrive verbatim
with their query and are never re-chunked.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import EmptyDocument, FileUnreadable, MalformedRecord

ETA3G_PREFIX = "Explain to a third-grader: "


class Distribution(str, Enum):
    NQ = "NQ"
    ETA3G = "Eta3G"
    TWOWIKIMH = "2WikiMH"
    MASH = "MASH"

    @classmethod
    def parse(cls, value: str) -> "Distribution":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown distribution {value!r}")


@dataclass
class Query:
    id: str
    distribution: Distribution
    text: str
    sub_queries: str | None = None
    gold_snippet_ids: list[str] = field(default_factory=list)


@dataclass
class SourceDocument:
    url: str
    text: str  # may be empty: a failed scrape is representable


@dataclass
class Snippet:
    id: str
    source_url: str
    text: str
    char_span: tuple[int, int]  # half-open, Unicode scalar offsets
    origin: str = "retrieved"  # "gold" | "retrieved"


def _sentence_ends(text: str) -> list[int]:
    """Offsets just past a terminal punctuation mark that ends a sentence."""
    ends = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch in ".!?" and (i + 1 == n or text[i + 1].isspace()):
            ends.append(i + 1)
    return ends


def chunk_document(doc: SourceDocument, target_len: int = 1000) -> list[Snippet]:
    """Split a document into consecutive snippets of roughly target_len chars.

    Snippet lengths stay within [ceil(0.6*target), floor(1.4*target)] except
    the final snippet, which may be shorter. Cut points prefer sentence ends
    inside the tolerance window, then whitespace, then a hard cut. The snippet
    texts concatenate back to the document exactly.
    """
    if target_len < 200:
        raise ValueError(f"target_len must be >= 200, got {target_len}")
    text = doc.text
    if len(text) == 0:
        raise EmptyDocument(f"document {doc.url!r} has no text")

    min_len = math.ceil(target_len * 0.6)
    max_len = math.floor(target_len * 1.4)
    sentence_ends = _sentence_ends(text)

    spans: list[tuple[int, int]] = []
    pos = 0
    while len(text) - pos > max_len:
        lo, hi = pos + min_len, pos + max_len
        ideal = pos + target_len
        in_window = [e for e in sentence_ends if lo <= e <= hi]
        if in_window:
            cut = min(in_window, key=lambda e: (abs(e - ideal), e))
        else:
            ws = [j for j in range(lo, hi + 1) if j < len(text) and text[j].isspace()]
            cut = min(ws, key=lambda e: (abs(e - ideal), e)) if ws else ideal
        spans.append((pos, cut))
        pos = cut
    spans.append((pos, len(text)))

    prefix = hashlib.sha1(doc.url.encode("utf-8")).hexdigest()[:8]
    return [
        Snippet(
            id=f"{prefix}-{i:03d}",
            source_url=doc.url,
            text=text[start:end],
            char_span=(start, end),
            origin="retrieved",
        )
        for i, (start, end) in enumerate(spans)
    ]


def _parse_query_record(obj: dict, line_no: int, distribution: Distribution) -> tuple[Query, list[Snippet]]:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not a JSON object")
    qid = obj.get("id")
    text = obj.get("text")
    if not isinstance(qid, str) or not qid:
        raise MalformedRecord(line_no, "missing or empty 'id'")
    if not isinstance(text, str) or not text:
        raise MalformedRecord(line_no, "missing or empty 'text'")
    if "distribution" in obj and obj["distribution"] != distribution.value:
        raise MalformedRecord(
            line_no,
            f"record distribution {obj['distribution']!r} != requested {distribution.value!r}",
        )
    if distribution is Distribution.ETA3G and not text.startswith(ETA3G_PREFIX):
        text = ETA3G_PREFIX + text
    sub_queries = obj.get("sub_queries")
    if sub_queries is not None and not isinstance(sub_queries, str):
        raise MalformedRecord(line_no, "'sub_queries' must be a string")

    gold: list[Snippet] = []
    raw_gold = obj.get("gold_snippets", [])
    if not isinstance(raw_gold, list):
        raise MalformedRecord(line_no, "'gold_snippets' must be a list")
    for j, g in enumerate(raw_gold):
        if not isinstance(g, dict) or not g.get("text"):
            raise MalformedRecord(line_no, f"gold snippet {j} missing 'text'")
        gold.append(
            Snippet(
                id=f"{qid}-gold-{j}",
                source_url=str(g.get("source_url", "")),
                text=g["text"],
                char_span=(0, len(g["text"])),
                origin="gold",
            )
        )
    gold_ids = obj.get("gold_snippet_ids") or [s.id for s in gold]
    return Query(id=qid, distribution=distribution, text=text, sub_queries=sub_queries, gold_snippet_ids=gold_ids), gold


def read_query_file(path: str | Path, distribution: Distribution) -> tuple[list[Query], list[Snippet]]:
    """Parse a query file, returning queries plus any inline gold snippets."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(str(exc)) from exc

    queries: list[Query] = []
    gold: list[Snippet] = []
    seen: set[str] = set()
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
        query, query_gold = _parse_query_record(obj, line_no, distribution)
        if query.id in seen:
            raise MalformedRecord(line_no, f"duplicate id {query.id!r}")
        seen.add(query.id)
        queries.append(query)
        gold.extend(query_gold)
    return queries, gold


def load_queries(path: str | Path, distribution: Distribution) -> list[Query]:
    """Load queries in file order, applying the Eta3G prefix where absent."""
    queries, _ = read_query_file(path, distribution)
    return queries


def write_queries(path: str | Path, queries: list[Query]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            obj: dict = {"id": q.id, "distribution": q.distribution.value, "text": q.text}
            if q.sub_queries is not None:
                obj["sub_queries"] = q.sub_queries
            if q.gold_snippet_ids:
                obj["gold_snippet_ids"] = q.gold_snippet_ids
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def write_snippets(path: str | Path, snippets: list[Snippet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in snippets:
            obj = {
                "id": s.id,
                "source_url": s.source_url,
                "text": s.text,
                "char_span": list(s.char_span),
                "origin": s.origin,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_snippets(path: str | Path) -> list[Snippet]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(str(exc)) from exc
    snippets = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
        try:
            snippets.append(
                Snippet(
                    id=obj["id"],
                    source_url=obj["source_url"],
                    text=obj["text"],
                    char_span=(obj["char_span"][0], obj["char_span"][1]),
                    origin=obj.get("origin", "retrieved"),
                )
            )
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedRecord(line_no, f"bad snippet record: {exc}") from exc
    return snippets
