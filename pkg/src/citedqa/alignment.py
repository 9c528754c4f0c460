"""Segmentation of generations into attributable units and word-for-word
quote alignment against source snippets.

Matching is case-sensitive but tolerant of the whitespace and glyph damage
introduced by web scraping: whitespace runs collapse to a single space and
curly quotes, apostrophes, and dashes map to their straight forms before
substring search.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .corpus import Snippet
from .errors import FileUnreadable, MalformedRecord, OverlappingQuotes

# Glyph folding applied before matching. Case is preserved.
_CHAR_FOLD = {
    "“": '"', "”": '"', "„": '"', "‟": '"',
    "‘": "'", "’": "'", "‚": "'", "‛": "'",
    "‐": "-", "‑": "-", "‒": "-", "–": "-",
    "—": "-", "―": "-", "−": "-",
}

_WORD_RE = re.compile(r"\S+")
_MARKER_RE = re.compile(r"\[[0-9]+\]")

# Tokens that end with a period without ending a sentence.
ABBREVIATIONS = {
    "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "jr.", "sr.", "rev.",
    "vs.", "etc.", "e.g.", "i.e.", "cf.", "al.", "u.s.", "u.k.", "u.n.",
    "no.", "nos.", "fig.", "figs.", "vol.", "pp.", "approx.", "dept.",
    "inc.", "ltd.", "co.", "corp.", "jan.", "feb.", "mar.", "apr.",
    "aug.", "sept.", "oct.", "nov.", "dec.", "mt.", "ave.", "blvd.",
}

_CLOSERS = "\"'”’)]"


def fold_glyphs(text: str) -> str:
    return "".join(_CHAR_FOLD.get(ch, ch) for ch in text)


def normalize(text: str) -> str:
    """Fold glyphs, collapse whitespace runs to single spaces, strip ends."""
    return " ".join(fold_glyphs(text).split())


def normalize_with_map(text: str) -> tuple[str, list[int]]:
    """normalize(), plus a map from normalized index to original index."""
    out: list[str] = []
    idx: list[int] = []
    pending_space_at: int | None = None
    for i, ch in enumerate(text):
        if ch.isspace():
            if out and pending_space_at is None:
                pending_space_at = i
            continue
        if pending_space_at is not None:
            out.append(" ")
            idx.append(pending_space_at)
            pending_space_at = None
        out.append(_CHAR_FOLD.get(ch, ch))
        idx.append(i)
    return "".join(out), idx


@dataclass
class Unit:
    index: int
    text: str
    char_span: tuple[int, int]
    requires_citation: bool = True


@dataclass
class QuoteSpan:
    text: str
    generation_span: tuple[int, int]
    matched: tuple[str, tuple[int, int]] | None = None
    closed: bool = True  # False: unbalanced trailing delimiter


@dataclass
class CitedQuote:
    snippet_id: str
    quote_text: str
    snippet_span: tuple[int, int]


class System(str, Enum):
    EXTRACTIVE = "extractive"
    QUOTED = "quoted"
    PARAPHRASED = "paraphrased"
    ENTAILED = "entailed"
    ABSTRACTIVE = "abstractive"
    POSTHOC_ABSTRACTIVE = "posthoc_abstractive"
    EXTERNAL = "external"

    @classmethod
    def parse(cls, value: str) -> "System":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown system {value!r}")


@dataclass
class CitedGeneration:
    query_id: str
    system: System
    text: str
    units: list[Unit] = field(default_factory=list)
    citations: list[list[CitedQuote]] = field(default_factory=list)
    abstained: bool = False

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "system": self.system.value,
            "text": self.text,
            "abstained": self.abstained,
            "units": [
                {
                    "index": u.index,
                    "text": u.text,
                    "char_span": list(u.char_span),
                    "requires_citation": u.requires_citation,
                }
                for u in self.units
            ],
            "citations": [
                [
                    {
                        "snippet_id": c.snippet_id,
                        "quote_text": c.quote_text,
                        "snippet_span": list(c.snippet_span),
                    }
                    for c in per_unit
                ]
                for per_unit in self.citations
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CitedGeneration":
        return cls(
            query_id=obj["query_id"],
            system=System.parse(obj["system"]),
            text=obj["text"],
            abstained=bool(obj.get("abstained", False)),
            units=[
                Unit(
                    index=u["index"],
                    text=u["text"],
                    char_span=(u["char_span"][0], u["char_span"][1]),
                    requires_citation=bool(u.get("requires_citation", True)),
                )
                for u in obj.get("units", [])
            ],
            citations=[
                [
                    CitedQuote(
                        snippet_id=c["snippet_id"],
                        quote_text=c["quote_text"],
                        snippet_span=(c["snippet_span"][0], c["snippet_span"][1]),
                    )
                    for c in per_unit
                ]
                for per_unit in obj.get("citations", [])
            ],
        )


def segment_sentences(text: str) -> list[Unit]:
    """Split text into sentence units on terminal punctuation.

    A '.', '!' or '?' ends a unit when followed by whitespace (or end of
    text), unless the token it closes is a known abbreviation. Closing
    quotes/brackets and citation markers like "[3]" directly after the
    punctuation stay with the unit they follow.
    """
    if not text:
        raise ValueError("text must be non-empty")
    n = len(text)
    boundaries: list[int] = []
    i = 0
    while i < n:
        ch = text[i]
        if ch in ".!?":
            # token containing this punctuation, for the abbreviation check
            k = i
            while k > 0 and not text[k - 1].isspace():
                k -= 1
            token = text[k : i + 1].lower()
            j = i
            while j + 1 < n and text[j + 1] in _CLOSERS:
                j += 1
            m = _match_marker_run(text, j + 1)
            if m > j + 1:
                j = m - 1
            if (j + 1 == n or text[j + 1].isspace()) and token not in ABBREVIATIONS:
                boundaries.append(j + 1)
                i = j + 1
                continue
        i += 1

    units: list[Unit] = []
    start = 0
    for b in boundaries:
        unit = _trimmed_unit(text, start, b, len(units))
        if unit is not None:
            units.append(unit)
        start = b
    tail = _trimmed_unit(text, start, n, len(units))
    if tail is not None:
        units.append(tail)
    if not units:
        units = [Unit(index=0, text=text, char_span=(0, n))]
    return units


def _match_marker_run(text: str, pos: int) -> int:
    """Advance past a run of [k] markers starting exactly at pos."""
    while True:
        m = _MARKER_RE.match(text, pos)
        if m is None:
            return pos
        pos = m.end()


def _trimmed_unit(text: str, start: int, end: int, index: int) -> Unit | None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if start == end:
        return None
    return Unit(index=index, text=text[start:end], char_span=(start, end))


def extract_quotes(text: str) -> list[QuoteSpan]:
    """Spans delimited by straight or curly double quotes.

    An opening delimiter with no closer yields a span running to the end of
    the text, flagged via closed=False.
    """
    spans: list[QuoteSpan] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == '"' or ch == "“":
            closer = '"' if ch == '"' else "”"
            end = text.find(closer, i + 1)
            if end == -1:
                spans.append(QuoteSpan(text=text[i + 1 :], generation_span=(i + 1, n), closed=False))
                break
            spans.append(QuoteSpan(text=text[i + 1 : end], generation_span=(i + 1, end)))
            i = end + 1
        else:
            i += 1
    return spans


def match_quote(quote: str, snippets: list[Snippet]) -> tuple[str, tuple[int, int]] | None:
    """First snippet (input order) containing the normalized quote.

    Returns (snippet_id, original-offset span into the snippet text), or
    None when no snippet contains the quote.
    """
    nq = normalize(quote)
    if not nq:
        return None
    for snippet in snippets:
        ns, idx = normalize_with_map(snippet.text)
        hit = ns.find(nq)
        if hit >= 0:
            start = idx[hit]
            end = idx[hit + len(nq) - 1] + 1
            return snippet.id, (start, end)
    return None


@dataclass
class QuoteStats:
    quoted_fraction: float
    mean_quote_words: float
    unquoted_word_count: int


def unquoted_word_stats(text: str, quotes: list[QuoteSpan]) -> QuoteStats:
    """Word-level accounting of how much of a generation is quoted.

    A word is any maximal non-whitespace run; it counts as quoted when it
    overlaps any quote span.
    """
    spans = sorted((q.generation_span for q in quotes), key=lambda s: s[0])
    for (s1, e1), (s2, _) in zip(spans, spans[1:]):
        if s2 < e1:
            raise OverlappingQuotes(f"spans ({s1},{e1}) and starting {s2} overlap")

    words = [(m.start(), m.end()) for m in _WORD_RE.finditer(text)]
    quoted = 0
    for ws, we in words:
        if any(ws < qe and qs < we for qs, qe in spans):
            quoted += 1
    total = len(words)
    quote_word_counts = [len(_WORD_RE.findall(q.text)) for q in quotes]
    return QuoteStats(
        quoted_fraction=(quoted / total) if total else 0.0,
        mean_quote_words=(sum(quote_word_counts) / len(quote_word_counts)) if quote_word_counts else 0.0,
        unquoted_word_count=total - quoted,
    )


def build_extractive(query_id: str, snippets: list[Snippet]) -> CitedGeneration:
    """Extractive output: one unit per snippet, each citing itself."""
    parts: list[str] = []
    units: list[Unit] = []
    citations: list[list[CitedQuote]] = []
    pos = 0
    for i, snippet in enumerate(snippets):
        if i > 0:
            parts.append("\n\n")
            pos += 2
        parts.append(snippet.text)
        units.append(Unit(index=i, text=snippet.text, char_span=(pos, pos + len(snippet.text))))
        citations.append(
            [CitedQuote(snippet_id=snippet.id, quote_text=snippet.text, snippet_span=(0, len(snippet.text)))]
        )
        pos += len(snippet.text)
    return CitedGeneration(
        query_id=query_id,
        system=System.EXTRACTIVE,
        text="".join(parts),
        units=units,
        citations=citations,
    )


def build_quoted(
    query_id: str,
    text: str,
    snippets: list[Snippet],
    abstained: bool = False,
) -> CitedGeneration:
    """Quoted generation: align demarcated quotes to snippets, per unit.

    Quotes spanning a sentence boundary are clipped to each unit so that
    every cited quote is a substring of its unit.
    """
    if abstained:
        return CitedGeneration(query_id=query_id, system=System.QUOTED, text=text, abstained=True)
    units = segment_sentences(text)
    quotes = extract_quotes(text)
    citations: list[list[CitedQuote]] = []
    for unit in units:
        us, ue = unit.char_span
        per_unit: list[CitedQuote] = []
        for q in quotes:
            qs, qe = q.generation_span
            lo, hi = max(qs, us), min(qe, ue)
            if lo >= hi:
                continue
            clipped = text[lo:hi]
            hit = match_quote(clipped, snippets)
            if hit is not None:
                sid, span = hit
                per_unit.append(CitedQuote(snippet_id=sid, quote_text=clipped, snippet_span=span))
        citations.append(per_unit)
    return CitedGeneration(
        query_id=query_id, system=System.QUOTED, text=text, units=units, citations=citations
    )


def write_generations(path: str | Path, generations: list[CitedGeneration]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in generations:
            fh.write(json.dumps(g.to_dict(), ensure_ascii=False) + "\n")


def read_generations(path: str | Path) -> list[CitedGeneration]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(str(exc)) from exc
    out = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(CitedGeneration.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedRecord(line_no, f"bad generation record: {exc}") from exc
    return out
