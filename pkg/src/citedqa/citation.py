"""Citation attachment for derived and post-hoc generations.

Derived operating points get citations by prompting: each sentence is
matched against the quotes used by the quoted generation. Post-hoc
citation scores snippet sentences against a generated sentence and keeps
candidates at or above a threshold, which is calibrated so the citation
density matches the entailed generations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import httpx

from .alignment import CitedGeneration, CitedQuote, System, Unit, segment_sentences
from .corpus import Distribution, Snippet
from .errors import MarkerOutOfRange, NoCitedSentences, ProviderExhausted, ScorerUnavailable
from .providers import ChatRequest, Provider
from .retrieval import LexicalScorer
from .templates import SYSTEM_MESSAGE, TemplateLibrary, render_prompt

_MARKER_RE = re.compile(r"\[(\d+)\]")

# Sentences matching any of these prefixes (case-folded) carry no claims.
FILLER_PREFIXES = (
    "great question",
    "that's a great question",
    "that is a great question",
    "good question",
    "that's a good question",
    "happy to explain",
    "happy to help",
    "i hope this helps",
    "hope this helps",
    "let me know if",
    "thanks for asking",
    "you're welcome",
    "sure, i can help",
    "of course!",
)


@dataclass
class CitationMarkerList:
    indices: list[int] = field(default_factory=list)


@dataclass
class PosthocConfig:
    threshold: float

    DEFAULTS = {
        Distribution.NQ: 0.5,
        Distribution.ETA3G: 0.25,
        Distribution.TWOWIKIMH: 0.05,
        Distribution.MASH: 0.25,
    }

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0,1], got {self.threshold}")

    @classmethod
    def default_for(cls, distribution: Distribution) -> "PosthocConfig":
        return cls(threshold=cls.DEFAULTS[distribution])


@dataclass
class GroundingAssessment:
    requires_citation: bool
    scores: list[float]


class MockGroundingScorer:
    """Deterministic stand-in for the external grounding service.

    score_fn(unit_text, candidate_text) -> [0,1]; requires_fn(unit_text)
    -> bool. Defaults: score by lexical overlap squashed into [0,1],
    require citation for everything non-filler.
    """

    kind = "mock"

    def __init__(self, score_fn=None, requires_fn=None):
        lexical = LexicalScorer()
        self._score_fn = score_fn or (lambda unit, cand: 1.0 - 1.0 / (1.0 + lexical.score(unit, cand)))
        self._requires_fn = requires_fn or (lambda unit: requires_citation(unit))

    def assess(self, unit_text: str, candidate_texts: list[str]) -> GroundingAssessment:
        return GroundingAssessment(
            requires_citation=bool(self._requires_fn(unit_text)),
            scores=[float(self._score_fn(unit_text, c)) for c in candidate_texts],
        )


class HttpGroundingScorer:
    """Client for a check-grounding HTTP service.

    POST {"answer_candidate": ..., "facts": [...]} ->
    {"requires_citation": bool, "scores": [...]}.
    """

    kind = "external"

    def __init__(self, endpoint: str, timeout_s: float = 30.0, retries: int = 3, backoff_s: float = 0.5,
                 transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s
        self._client = httpx.Client(transport=transport, timeout=timeout_s)

    def assess(self, unit_text: str, candidate_texts: list[str]) -> GroundingAssessment:
        import time as _time

        payload = {"answer_candidate": unit_text, "facts": candidate_texts}
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                response = self._client.post(self.endpoint, json=payload)
                response.raise_for_status()
                body = response.json()
                scores = [float(s) for s in body["scores"]]
                if len(scores) != len(candidate_texts) or any(not 0.0 <= s <= 1.0 for s in scores):
                    raise ScorerUnavailable(f"malformed grounding scores from {self.endpoint}")
                return GroundingAssessment(requires_citation=bool(body["requires_citation"]), scores=scores)
            except ScorerUnavailable:
                raise
            except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
                last_error = exc
                if attempt < self.retries - 1:
                    _time.sleep(self.backoff_s * (2**attempt))
        raise ScorerUnavailable(f"{self.endpoint} unreachable after {self.retries} attempts: {last_error}")


def requires_citation(unit_text: str, filler_prefixes: tuple[str, ...] = FILLER_PREFIXES) -> bool:
    """False for filler (greetings, meta talk) and empty units."""
    norm = unit_text.strip().lower()
    if not norm:
        return False
    return not any(norm.startswith(prefix) for prefix in filler_prefixes)


def parse_marker_reply(reply: str, n_candidates: int) -> CitationMarkerList:
    """Bracketed indices from a provider reply: in-range, deduped, ascending."""
    seen: set[int] = set()
    for raw in _MARKER_RE.findall(reply):
        k = int(raw)
        if 1 <= k <= n_candidates:
            seen.add(k)
    return CitationMarkerList(indices=sorted(seen))


def identify_citations(
    provider: Provider,
    unit_text: str,
    candidate_quotes: list[str],
    distribution: Distribution,
    templates: TemplateLibrary | None = None,
) -> CitationMarkerList:
    """One provider call mapping a sentence to the quotes that support it.

    Any reply parses to a (possibly empty) marker list; an uncited unit is
    a valid outcome, never an error.
    """
    templates = templates or TemplateLibrary()
    template = templates.get("citation", distribution)
    request = ChatRequest(
        op="citation",
        system=SYSTEM_MESSAGE,
        user=render_prompt(template, {"text": unit_text, "quote": candidate_quotes}),
        temperature=0.0,
    )
    reply = provider.complete(request)
    return parse_marker_reply(reply.text, len(candidate_quotes))


def snippet_sentence_candidates(sources: list[Snippet]) -> list[tuple[Snippet, Unit]]:
    """Sentence-level citation candidates across all source snippets."""
    candidates: list[tuple[Snippet, Unit]] = []
    for snippet in sources:
        if not snippet.text:
            continue
        for unit in segment_sentences(snippet.text):
            candidates.append((snippet, unit))
    return candidates


def posthoc_cite(
    unit_text: str,
    candidate_sources: list[Snippet],
    scorer,
    config: PosthocConfig,
) -> list[CitedQuote]:
    """Cite every snippet sentence whose support score clears the threshold.

    Returns no citations when the scorer says the unit needs none.
    """
    candidates = snippet_sentence_candidates(candidate_sources)
    if not candidates:
        return []
    assessment = scorer.assess(unit_text, [u.text for _, u in candidates])
    if not assessment.requires_citation:
        return []
    cited = []
    for (snippet, unit), score in zip(candidates, assessment.scores):
        if score >= config.threshold:
            cited.append(CitedQuote(snippet_id=snippet.id, quote_text=unit.text, snippet_span=unit.char_span))
    return cited


@dataclass
class DevGeneration:
    """A development-set item for threshold calibration."""

    unit_texts: list[str]
    sources: list[Snippet]


@dataclass
class CalibrationRow:
    alpha: float
    cps: float | None  # None: no cited sentences at this threshold
    delta: float | None


def calibration_table(dev_generations: list[DevGeneration], scorer, target_cps: float,
                      grid: list[float]) -> list[CalibrationRow]:
    """Citations-per-cited-sentence at each grid threshold.

    Scores are assessed once per unit and swept over the grid. Only units
    the scorer marks as requiring citation enter the counts; a cited
    sentence is one with at least one citation at that threshold.
    """
    if not grid:
        raise ValueError("grid must be non-empty")
    if target_cps <= 0:
        raise ValueError(f"target_cps must be positive, got {target_cps}")

    unit_scores: list[list[float]] = []
    for item in dev_generations:
        candidates = snippet_sentence_candidates(item.sources)
        texts = [u.text for _, u in candidates]
        for unit_text in item.unit_texts:
            assessment = scorer.assess(unit_text, texts)
            if assessment.requires_citation:
                unit_scores.append(assessment.scores)

    rows = []
    for alpha in grid:
        total = 0
        cited_units = 0
        for scores in unit_scores:
            count = sum(1 for s in scores if s >= alpha)
            if count:
                cited_units += 1
                total += count
        if cited_units:
            cps = total / cited_units
            rows.append(CalibrationRow(alpha=alpha, cps=cps, delta=abs(cps - target_cps)))
        else:
            rows.append(CalibrationRow(alpha=alpha, cps=None, delta=None))
    return rows


def calibrate_threshold(dev_generations: list[DevGeneration], scorer, target_cps: float,
                        grid: list[float]) -> float:
    """Grid threshold whose citation density lands nearest target_cps.

    Ties prefer the larger threshold (fewer, higher-confidence citations).
    """
    rows = calibration_table(dev_generations, scorer, target_cps, grid)
    feasible = [r for r in rows if r.delta is not None]
    if not feasible:
        raise NoCitedSentences("no threshold on the grid yields any cited sentence")
    best = min(feasible, key=lambda r: (r.delta, -r.alpha))
    return best.alpha


def render_calibration_table(rows: list[CalibrationRow], distribution: str | None = None) -> str:
    header = f"# calibration{' ' + distribution if distribution else ''}\n"
    lines = [header + f"{'alpha':>8} {'cps':>10} {'|delta|':>10}"]
    for r in rows:
        cps = f"{r.cps:.4f}" if r.cps is not None else "-"
        delta = f"{r.delta:.4f}" if r.delta is not None else "-"
        lines.append(f"{r.alpha:>8.3f} {cps:>10} {delta:>10}")
    return "\n".join(lines) + "\n"


def parse_external_generation(text_with_markers: str, sources: list[Snippet]) -> CitedGeneration:
    """Ingest an externally generated response with inline [k] markers.

    Each marker binds its sentence to source k (1-based). The cited quote
    is the source sentence that best matches the unit lexically, so the
    annotation UI can highlight a concrete span.
    """
    units = segment_sentences(text_with_markers)
    lexical = LexicalScorer()
    citations: list[list[CitedQuote]] = []
    for unit in units:
        unit_plain = _MARKER_RE.sub("", unit.text).strip()
        per_unit: list[CitedQuote] = []
        seen: set[int] = set()
        for raw in _MARKER_RE.findall(unit.text):
            k = int(raw)
            if k < 1 or k > len(sources):
                raise MarkerOutOfRange(k, len(sources))
            if k in seen:
                continue
            seen.add(k)
            snippet = sources[k - 1]
            sentence_units = segment_sentences(snippet.text) if snippet.text else []
            if sentence_units:
                best = max(sentence_units, key=lambda u: lexical.score(unit_plain, u.text))
                per_unit.append(CitedQuote(snippet_id=snippet.id, quote_text=best.text,
                                           snippet_span=best.char_span))
            else:
                per_unit.append(CitedQuote(snippet_id=snippet.id, quote_text="", snippet_span=(0, 0)))
        citations.append(per_unit)
    return CitedGeneration(
        query_id="",
        system=System.EXTERNAL,
        text=text_with_markers,
        units=units,
        citations=citations,
    )
