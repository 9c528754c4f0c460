"""Exception types shared across the pipeline.

Every error carries enough context to be rendered as a structured error body
by the CLI and the annotation service.
"""

from __future__ import annotations


class CitedQaError(Exception):
    """Base class for all package errors."""

    code = "error"

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self)}


class FileUnreadable(CitedQaError):
    code = "file_unreadable"


class MalformedRecord(CitedQaError):
    """A line of an input file failed validation."""

    code = "malformed_record"

    def __init__(self, line_number: int, reason: str = ""):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}" if reason else f"line {line_number}")


class EmptyDocument(CitedQaError):
    code = "empty_document"


class ScorerUnavailable(CitedQaError):
    code = "scorer_unavailable"


class ProviderExhausted(CitedQaError):
    code = "provider_exhausted"


class OverlappingQuotes(CitedQaError):
    code = "overlapping_quotes"


class MarkerOutOfRange(CitedQaError):
    code = "marker_out_of_range"

    def __init__(self, marker: int, n_sources: int | None = None):
        self.marker = marker
        self.n_sources = n_sources
        detail = f"marker [{marker}]"
        if n_sources is not None:
            detail += f" with {n_sources} sources"
        super().__init__(detail)


class NoCitedSentences(CitedQaError):
    code = "no_cited_sentences"


class EmptyInput(CitedQaError):
    code = "empty_input"


class MissingBaseline(CitedQaError):
    code = "missing_baseline"

    def __init__(self, annotator_id: str):
        self.annotator_id = annotator_id
        super().__init__(f"annotator {annotator_id!r} has no quoted-system baseline records")


class InconsistentRecords(CitedQaError):
    code = "inconsistent_records"


class IncompleteTrace(CitedQaError):
    code = "incomplete_trace"


class InfeasibleLoad(CitedQaError):
    code = "infeasible_load"


class IllegalTransition(CitedQaError):
    code = "illegal_transition"


class StaleSession(CitedQaError):
    code = "stale_session"


class StudyNotClosed(CitedQaError):
    code = "study_not_closed"
