"""Generation orchestration: quoted best-of-N, derived rewrites, and direct
abstractive generation.

The quoted generation is sampled n_drafts times and the draft with the
fewest unquoted words wins, ties going to the earliest draft. Paraphrased,
entailed, and abstractive generations are single-call rewrites of the
quoted text (without the snippets in context). Direct abstractive
generation sees only the query, with a word-count target calibrated to the
entailed generation lengths per distribution.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .alignment import CitedGeneration, extract_quotes, unquoted_word_stats
from .corpus import Distribution, Query, Snippet
from .errors import ProviderExhausted
from .providers import ChatRequest, Provider
from .templates import SYSTEM_MESSAGE, PromptTemplate, TemplateLibrary, render_prompt

ABSTENTION_SENTINEL = "Insufficient information to generate a grounded response."

# Mean entailed generation word counts per distribution, rounded.
DIRECT_TARGET_WORDS = {
    Distribution.NQ: 30,
    Distribution.ETA3G: 30,
    Distribution.TWOWIKIMH: 17,
    Distribution.MASH: 55,
}

DRAFT_TEMPERATURE = 0.7
DERIVE_TEMPERATURE = 0.0

_QUOTE_CHARS_RE = re.compile("[\"“”„‟]")


@dataclass
class GenerationDraft:
    text: str
    unquoted_word_count: int
    provider_trace: list[str] = field(default_factory=list)
    abstained: bool = False


def is_abstention(text: str) -> bool:
    return text.strip() == ABSTENTION_SENTINEL


def strip_quote_marks(text: str) -> str:
    """Drop double-quote delimiters so rewrites do not inherit them."""
    return _QUOTE_CHARS_RE.sub("", text)


def _request(op: str, template: PromptTemplate, live_inputs: dict, temperature: float,
             seed: int | None = None, target_words: int | None = None) -> ChatRequest:
    return ChatRequest(
        op=op,
        system=SYSTEM_MESSAGE,
        user=render_prompt(template, live_inputs, target_words=target_words),
        temperature=temperature,
        seed=seed,
    )


def derive_subqueries(provider: Provider, query: Query, templates: TemplateLibrary | None = None) -> str:
    """Sub-question string for a query; falls back to the query text itself."""
    if not query.text:
        raise ValueError("query text must be non-empty")
    templates = templates or TemplateLibrary()
    template = templates.get("subquery", query.distribution)
    request = _request("subquery", template, {"query": query.text}, DERIVE_TEMPERATURE)
    try:
        reply = provider.complete(request)
    except ProviderExhausted:
        return query.text
    text = reply.text.strip()
    return text if text else query.text


def generate_quoted(
    provider: Provider,
    query: Query,
    snippets: list[Snippet],
    n_drafts: int = 10,
    templates: TemplateLibrary | None = None,
    temperature: float = DRAFT_TEMPERATURE,
) -> GenerationDraft:
    """Best-of-n_drafts quoted generation, minimizing unquoted words.

    Abstention drafts (the exact sentinel sentence) only win when every
    successful draft abstained. Raises ProviderExhausted when all calls
    fail.
    """
    if not snippets:
        raise ValueError("snippets must be non-empty")
    templates = templates or TemplateLibrary()
    template = templates.get("quoted", query.distribution)
    live = {
        "query": query.text,
        "subqueries": query.sub_queries or query.text,
        "source": [s.text for s in snippets],
    }
    request = _request("quoted", template, live, temperature)

    drafts: list[GenerationDraft] = []
    failures = 0
    for _ in range(n_drafts):
        try:
            reply = provider.complete(request)
        except ProviderExhausted:
            failures += 1
            continue
        text = reply.text
        if is_abstention(text):
            stats = unquoted_word_stats(text, [])
            drafts.append(GenerationDraft(text=text.strip(), unquoted_word_count=stats.unquoted_word_count,
                                          provider_trace=[reply.call_id], abstained=True))
            continue
        stats = unquoted_word_stats(text, extract_quotes(text))
        drafts.append(GenerationDraft(text=text, unquoted_word_count=stats.unquoted_word_count,
                                      provider_trace=[reply.call_id]))
    if not drafts:
        raise ProviderExhausted(f"all {n_drafts} quoted draft calls failed")

    answering = [d for d in drafts if not d.abstained]
    if not answering:
        return drafts[0]
    return min(answering, key=lambda d: d.unquoted_word_count)


def derive_op(
    provider: Provider,
    query: Query,
    quoted: CitedGeneration,
    target: str,
    templates: TemplateLibrary | None = None,
) -> str:
    """One-call rewrite of a quoted generation into a derived operating point.

    target is one of "paraphrased", "entailed", "abstractive". The prompt
    sees the query and the dequoted generation text, not the snippets. The
    raw derived text goes to the citation module for per-unit citations.
    """
    if target not in ("paraphrased", "entailed", "abstractive"):
        raise ValueError(f"target must be a derived operating point, got {target!r}")
    if quoted.abstained:
        raise ValueError("cannot derive from an abstention")
    templates = templates or TemplateLibrary()
    template = templates.get(target, query.distribution)
    live = {"query": query.text, "input": strip_quote_marks(quoted.text)}
    request = _request(target, template, live, DERIVE_TEMPERATURE)
    reply = provider.complete(request)
    return reply.text


def generate_abstractive_direct(
    provider: Provider,
    query: Query,
    target_words: int | None = None,
    templates: TemplateLibrary | None = None,
) -> str:
    """Direct abstractive generation from the query alone, no sources.

    target_words defaults to the distribution's calibrated length.
    The reply passes through verbatim; citations come post hoc.
    """
    if target_words is None:
        target_words = DIRECT_TARGET_WORDS[query.distribution]
    if target_words <= 0:
        raise ValueError(f"target_words must be positive, got {target_words}")
    templates = templates or TemplateLibrary()
    template = templates.get("posthoc_abstractive", query.distribution)
    request = _request("posthoc_abstractive", template, {"query": query.text},
                       DERIVE_TEMPERATURE, target_words=target_words)
    reply = provider.complete(request)
    return reply.text
