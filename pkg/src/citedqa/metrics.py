"""Aggregation of human judgments and generation statistics.

Point estimates use exact rational-friendly arithmetic (plain sums and
divisions); 95% intervals come from a seeded percentile bootstrap so every
aggregation is deterministic and permutation-invariant.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .alignment import CitedGeneration
from .errors import (
    EmptyInput,
    FileUnreadable,
    IncompleteTrace,
    InconsistentRecords,
    MalformedRecord,
    MissingBaseline,
)

BOOTSTRAP_RESAMPLES = 2000
BOOTSTRAP_SEED = 17

_MARKER_RE = re.compile(r"\[\d+\]")
_WORD_RE = re.compile(r"\S+")

KINDS = ("fluency", "utility", "coverage", "precision")
_SCALE_KINDS = ("fluency", "utility")


@dataclass
class AnnotationRecord:
    annotator_id: str
    query_id: str
    system: str
    kind: str
    value: int
    unit_index: int | None = None
    citation_index: int | None = None
    t2v_ms: float | None = None
    label: str | None = None
    batch: str = "batch-1"
    distribution: str | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind in _SCALE_KINDS:
            if self.value not in (1, 2, 3):
                raise ValueError(f"{self.kind} value must be 1..3, got {self.value}")
            if self.unit_index is not None:
                raise ValueError(f"{self.kind} records carry no unit_index")
        else:
            if self.value not in (0, 1):
                raise ValueError(f"{self.kind} value must be 0 or 1, got {self.value}")
            if self.unit_index is None:
                raise ValueError(f"{self.kind} records need a unit_index")
        if self.kind == "precision" and self.citation_index is None:
            raise ValueError("precision records need a citation_index")
        if self.kind == "coverage":
            if self.t2v_ms is None or self.t2v_ms < 0:
                raise ValueError("coverage records need t2v_ms >= 0")
        elif self.t2v_ms is not None:
            raise ValueError("t2v_ms belongs to coverage records only")

    def to_dict(self) -> dict:
        obj: dict = {
            "annotator_id": self.annotator_id,
            "query_id": self.query_id,
            "system": self.system,
            "kind": self.kind,
            "value": self.value,
            "batch": self.batch,
        }
        for key in ("unit_index", "citation_index", "t2v_ms", "label", "distribution"):
            value = getattr(self, key)
            if value is not None:
                obj[key] = value
        return obj

    @classmethod
    def from_dict(cls, obj: dict) -> "AnnotationRecord":
        record = cls(
            annotator_id=obj["annotator_id"],
            query_id=obj["query_id"],
            system=obj["system"],
            kind=obj["kind"],
            value=int(obj["value"]),
            unit_index=obj.get("unit_index"),
            citation_index=obj.get("citation_index"),
            t2v_ms=obj.get("t2v_ms"),
            label=obj.get("label"),
            batch=obj.get("batch", "batch-1"),
            distribution=obj.get("distribution"),
        )
        record.validate()
        return record


def write_records(path: str | Path, records: list[AnnotationRecord], header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


def read_records(path: str | Path) -> list[AnnotationRecord]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(str(exc)) from exc
    records = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            records.append(AnnotationRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(line_no, f"bad annotation record: {exc}") from exc
    return records


@dataclass
class Estimate:
    value: float
    ci_low: float
    ci_high: float
    n: int


def bootstrap_interval(values: list[float], seed: int = BOOTSTRAP_SEED,
                       resamples: int = BOOTSTRAP_RESAMPLES) -> tuple[float, float]:
    """95% percentile bootstrap interval of the mean."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return float(arr[0]), float(arr[0])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(resamples, arr.size))
    means = arr[idx].mean(axis=1)
    low, high = np.percentile(means, [2.5, 97.5])
    return float(low), float(high)


def _estimate(values: list[float]) -> Estimate:
    mean = sum(values) / len(values)
    low, high = bootstrap_interval(values)
    return Estimate(value=mean, ci_low=low, ci_high=high, n=len(values))


def _mean_of(records: list[AnnotationRecord], kind: str) -> Estimate:
    values = [r.value for r in records if r.kind == kind]
    if not values:
        raise EmptyInput(f"no {kind} records")
    return _estimate([float(v) for v in values])


def citation_precision(records: list[AnnotationRecord]) -> Estimate:
    """Fraction of citations whose source supports a claim of the unit."""
    return _mean_of(records, "precision")


def citation_coverage(records: list[AnnotationRecord]) -> Estimate:
    """Fraction of citation-requiring units fully supported by citations."""
    return _mean_of(records, "coverage")


def fluency_mean(records: list[AnnotationRecord]) -> Estimate:
    return _mean_of(records, "fluency")


def utility_mean(records: list[AnnotationRecord]) -> Estimate:
    return _mean_of(records, "utility")


def relative_t2v(records: list[AnnotationRecord], baseline_system: str = "quoted") -> dict[str, Estimate]:
    """Per-system mean T2V, normalized by each annotator's baseline.

    The baseline is the annotator's mean T2V over the baseline system's
    coverage records within the same batch. Every contributing annotator
    must have such records, else MissingBaseline.
    """
    timed = [r for r in records if r.kind == "coverage"]
    if not timed:
        raise EmptyInput("no coverage records with timing")
    baselines: dict[tuple[str, str], float] = {}
    for (annotator, batch) in sorted({(r.annotator_id, r.batch) for r in timed}):
        times = [r.t2v_ms for r in timed
                 if r.annotator_id == annotator and r.batch == batch and r.system == baseline_system]
        if not times:
            raise MissingBaseline(annotator)
        baselines[(annotator, batch)] = sum(times) / len(times)

    by_system: dict[str, list[float]] = {}
    for r in timed:
        normalized = r.t2v_ms / baselines[(r.annotator_id, r.batch)]
        by_system.setdefault(r.system, []).append(normalized)
    return {system: _estimate(values) for system, values in sorted(by_system.items())}


@dataclass
class Breakdown:
    no_citation: float
    only_imprecise: float
    partial: float
    n_failures: int


def coverage_failure_breakdown(records: list[AnnotationRecord],
                               generations: list[CitedGeneration]) -> Breakdown:
    """Classify every coverage failure by what went wrong with its citations.

    A failed unit with no citations is 'no_citation'; with citations all
    judged imprecise, 'only_imprecise'; otherwise 'partial'.
    """
    by_key = {(g.query_id, g.system.value): g for g in generations}
    precision_votes: dict[tuple[str, str, int, int], int] = {}
    for r in records:
        if r.kind == "precision":
            precision_votes[(r.query_id, r.system, r.unit_index, r.citation_index)] = r.value

    counts = {"no_citation": 0, "only_imprecise": 0, "partial": 0}
    failures = 0
    for r in records:
        if r.kind != "coverage" or r.value != 0:
            continue
        failures += 1
        generation = by_key.get((r.query_id, r.system))
        if generation is None:
            raise InconsistentRecords(f"no generation for ({r.query_id}, {r.system})")
        if r.unit_index is None or r.unit_index >= len(generation.citations):
            raise InconsistentRecords(f"unit {r.unit_index} missing in ({r.query_id}, {r.system})")
        citations = generation.citations[r.unit_index]
        if not citations:
            counts["no_citation"] += 1
            continue
        votes = []
        for ci in range(len(citations)):
            key = (r.query_id, r.system, r.unit_index, ci)
            if key not in precision_votes:
                raise InconsistentRecords(
                    f"no precision record for citation {ci} of unit {r.unit_index} ({r.query_id}, {r.system})")
            votes.append(precision_votes[key])
        if all(v == 0 for v in votes):
            counts["only_imprecise"] += 1
        else:
            counts["partial"] += 1

    if failures == 0:
        return Breakdown(0.0, 0.0, 0.0, 0)
    return Breakdown(
        no_citation=counts["no_citation"] / failures,
        only_imprecise=counts["only_imprecise"] / failures,
        partial=counts["partial"] / failures,
        n_failures=failures,
    )


@dataclass
class DescriptiveStats:
    n_generations: int
    mean_word_count: float | None
    citations_per_cited_sentence: float | None


def word_count(text: str) -> int:
    """Words after removing [k] citation markers.

    Tokens left with no letters or digits (stranded punctuation where a
    marker was removed) do not count.
    """
    tokens = _WORD_RE.findall(_MARKER_RE.sub("", text))
    return sum(1 for t in tokens if any(ch.isalnum() for ch in t))


def descriptive_stats(generations: list[CitedGeneration]) -> DescriptiveStats:
    if not generations:
        return DescriptiveStats(0, None, None)
    words = [word_count(g.text) for g in generations]
    total_citations = 0
    cited_units = 0
    for g in generations:
        for per_unit in g.citations:
            if per_unit:
                cited_units += 1
                total_citations += len(per_unit)
    cps = (total_citations / cited_units) if cited_units else None
    return DescriptiveStats(
        n_generations=len(generations),
        mean_word_count=sum(words) / len(words),
        citations_per_cited_sentence=cps,
    )


class AbstentionKind(str, Enum):
    NONE = "none"
    GENERATION_ABSTENTION = "generation_abstention"
    RESPONSE_RETRIEVAL_FAILURE = "response_retrieval_failure"
    CITATION_RETRIEVAL_FAILURE = "citation_retrieval_failure"


@dataclass
class QueryTrace:
    """Per-query pipeline outcomes needed to classify an abstention."""

    query_id: str
    system: str = ""
    distribution: str | None = None
    sources_found: int | None = None
    sources_relevant: bool | None = None  # defaults to sources_found > 0
    sentinel_fired: bool | None = None
    response_produced: bool | None = None
    citation_retrieval_failed: bool | None = None


def classify_abstention(trace: QueryTrace) -> AbstentionKind:
    required = (trace.sources_found, trace.sentinel_fired, trace.response_produced,
                trace.citation_retrieval_failed)
    if any(v is None for v in required):
        raise IncompleteTrace(f"trace for {trace.query_id!r} is missing fields")
    sources_ok = trace.sources_found > 0 and (trace.sources_relevant is not False)
    if trace.sentinel_fired:
        return AbstentionKind.GENERATION_ABSTENTION if sources_ok else AbstentionKind.RESPONSE_RETRIEVAL_FAILURE
    if trace.response_produced and trace.citation_retrieval_failed:
        return AbstentionKind.CITATION_RETRIEVAL_FAILURE
    return AbstentionKind.NONE


@dataclass
class CellReport:
    system: str
    distribution: str
    fluency: Estimate | None = None
    utility: Estimate | None = None
    precision: Estimate | None = None
    coverage: Estimate | None = None
    relative_t2v: Estimate | None = None
    mean_word_count: float | None = None
    citations_per_cited_sentence: float | None = None
    n_generations: int = 0
    breakdown: Breakdown | None = None
    abstention_counts: dict[str, int] = field(default_factory=dict)


@dataclass
class MetricsReport:
    cells: list[CellReport]

    def to_dict(self) -> dict:
        def estimate(e: Estimate | None):
            return None if e is None else {"value": e.value, "ci_low": e.ci_low, "ci_high": e.ci_high, "n": e.n}

        return {
            "cells": [
                {
                    "system": c.system,
                    "distribution": c.distribution,
                    "fluency": estimate(c.fluency),
                    "utility": estimate(c.utility),
                    "precision": estimate(c.precision),
                    "coverage": estimate(c.coverage),
                    "relative_t2v": estimate(c.relative_t2v),
                    "mean_word_count": c.mean_word_count,
                    "citations_per_cited_sentence": c.citations_per_cited_sentence,
                    "n_generations": c.n_generations,
                    "coverage_failure_breakdown": None if c.breakdown is None else {
                        "no_citation": c.breakdown.no_citation,
                        "only_imprecise": c.breakdown.only_imprecise,
                        "partial": c.breakdown.partial,
                        "n_failures": c.breakdown.n_failures,
                    },
                    "abstention_counts": c.abstention_counts,
                }
                for c in self.cells
            ]
        }


def _record_distribution(record: AnnotationRecord, lookup: dict[str, str]) -> str:
    return record.distribution or lookup.get(record.query_id, "all")


def build_report(
    records: list[AnnotationRecord],
    generations: list[CitedGeneration] | None = None,
    query_distributions: dict[str, str] | None = None,
    traces: list[QueryTrace] | None = None,
) -> MetricsReport:
    """Aggregate everything into per-(system, distribution) cells.

    Cells missing a metric's inputs (no records of that kind, no T2V
    baseline) leave that metric unset rather than failing the whole report.
    """
    generations = generations or []
    lookup = dict(query_distributions or {})
    distributions = sorted({_record_distribution(r, lookup) for r in records}
                           | {lookup.get(g.query_id, "all") for g in generations})
    cells = []
    for dist in distributions:
        dist_records = [r for r in records if _record_distribution(r, lookup) == dist]
        dist_gens = [g for g in generations if lookup.get(g.query_id, "all") == dist]
        try:
            t2v = relative_t2v(dist_records)
        except (EmptyInput, MissingBaseline):
            t2v = {}
        systems = sorted({r.system for r in dist_records} | {g.system.value for g in dist_gens})
        for system in systems:
            sys_records = [r for r in dist_records if r.system == system]
            sys_gens = [g for g in dist_gens if g.system.value == system]
            cell = CellReport(system=system, distribution=dist)
            for name, fn in (("fluency", fluency_mean), ("utility", utility_mean),
                             ("precision", citation_precision), ("coverage", citation_coverage)):
                try:
                    setattr(cell, name, fn(sys_records))
                except EmptyInput:
                    pass
            cell.relative_t2v = t2v.get(system)
            stats = descriptive_stats(sys_gens)
            cell.n_generations = stats.n_generations
            cell.mean_word_count = stats.mean_word_count
            cell.citations_per_cited_sentence = stats.citations_per_cited_sentence
            if sys_gens and any(r.kind == "coverage" for r in sys_records):
                try:
                    cell.breakdown = coverage_failure_breakdown(sys_records, sys_gens)
                except InconsistentRecords:
                    cell.breakdown = None
            if traces:
                counts: dict[str, int] = {}
                for trace in traces:
                    if trace.system != system:
                        continue
                    trace_dist = trace.distribution or lookup.get(trace.query_id, "all")
                    if trace_dist != dist:
                        continue
                    kind = classify_abstention(trace).value
                    counts[kind] = counts.get(kind, 0) + 1
                cell.abstention_counts = counts
            cells.append(cell)
    return MetricsReport(cells=cells)


def _fmt_estimate(e: Estimate | None, decimals: int = 3) -> str:
    if e is None:
        return "-"
    return f"{e.value:.{decimals}f} [{e.ci_low:.{decimals}f}, {e.ci_high:.{decimals}f}]"


def render_report_text(report: MetricsReport) -> str:
    """Plain-text tables: quality metrics, generation statistics, and the
    coverage-failure breakdown, one block per distribution."""
    lines: list[str] = []
    distributions = sorted({c.distribution for c in report.cells})
    for dist in distributions:
        cells = [c for c in report.cells if c.distribution == dist]
        lines.append(f"== distribution: {dist} ==")
        lines.append("")
        lines.append(f"{'system':<22} {'fluency':>24} {'utility':>24} {'precision':>24} "
                     f"{'coverage':>24} {'rel_t2v':>24}")
        for c in cells:
            lines.append(f"{c.system:<22} {_fmt_estimate(c.fluency):>24} {_fmt_estimate(c.utility):>24} "
                         f"{_fmt_estimate(c.precision):>24} {_fmt_estimate(c.coverage):>24} "
                         f"{_fmt_estimate(c.relative_t2v):>24}")
        lines.append("")
        lines.append(f"{'system':<22} {'gens':>6} {'words':>8} {'cites/sent':>11}")
        for c in cells:
            words = f"{c.mean_word_count:.1f}" if c.mean_word_count is not None else "-"
            cps = f"{c.citations_per_cited_sentence:.2f}" if c.citations_per_cited_sentence is not None else "-"
            lines.append(f"{c.system:<22} {c.n_generations:>6} {words:>8} {cps:>11}")
        lines.append("")
        lines.append(f"{'system':<22} {'failures':>9} {'no_cite':>9} {'imprecise':>10} {'partial':>9}")
        for c in cells:
            if c.breakdown is None:
                lines.append(f"{c.system:<22} {'-':>9} {'-':>9} {'-':>10} {'-':>9}")
            else:
                b = c.breakdown
                lines.append(f"{c.system:<22} {b.n_failures:>9} {b.no_citation:>9.1%} "
                             f"{b.only_imprecise:>10.1%} {b.partial:>9.1%}")
        abstaining = [c for c in cells if c.abstention_counts]
        if abstaining:
            lines.append("")
            lines.append(f"{'system':<22} abstentions")
            for c in abstaining:
                parts = ", ".join(f"{k}={v}" for k, v in sorted(c.abstention_counts.items()))
                lines.append(f"{c.system:<22} {parts}")
        lines.append("")
    return "\n".join(lines)
