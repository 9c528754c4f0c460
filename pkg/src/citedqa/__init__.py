"""Cited question answering across extractive and abstractive operating
points: corpus handling, retrieval, generation, quote alignment, citation
attachment, verifiability metrics, and an annotation study service."""

from .alignment import (
    CitedGeneration,
    CitedQuote,
    QuoteSpan,
    System,
    Unit,
    build_extractive,
    build_quoted,
    extract_quotes,
    match_quote,
    normalize,
    segment_sentences,
    unquoted_word_stats,
)
from .citation import (
    CitationMarkerList,
    DevGeneration,
    MockGroundingScorer,
    PosthocConfig,
    calibrate_threshold,
    identify_citations,
    parse_external_generation,
    posthoc_cite,
    requires_citation,
)
from .corpus import (
    ETA3G_PREFIX,
    Distribution,
    Query,
    Snippet,
    SourceDocument,
    chunk_document,
    load_queries,
)
from .generation import (
    ABSTENTION_SENTINEL,
    GenerationDraft,
    derive_op,
    derive_subqueries,
    generate_abstractive_direct,
    generate_quoted,
)
from .metrics import (
    AnnotationRecord,
    QueryTrace,
    citation_coverage,
    citation_precision,
    classify_abstention,
    coverage_failure_breakdown,
    descriptive_stats,
    relative_t2v,
)
from .providers import ChatRequest, HttpChatProvider, ReplayProvider, ScriptedProvider, TraceLog
from .retrieval import EmbeddingScorer, LexicalScorer, ScoredSnippet, top_k

__version__ = "0.1.0"
