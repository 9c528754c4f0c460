"""Aggregate annotation records into the metrics report.

Builds a small synthetic study: two systems, one annotator, per-unit
coverage judgments with timing, and per-citation precision judgments.

Run:  python3 demos/04_metrics_report.py
"""

from citedqa import AnnotationRecord
from citedqa.metrics import build_report, render_report_text

records = []
for i, (system, covered, t2v) in enumerate([
    ("quoted", 1, 6_000), ("quoted", 1, 8_000), ("quoted", 0, 11_000),
    ("entailed", 1, 14_000), ("entailed", 0, 26_000),
]):
    query = f"q{i % 3}"
    records.append(AnnotationRecord(annotator_id="w1", query_id=query, system=system,
                                    kind="coverage", value=covered, unit_index=0,
                                    t2v_ms=float(t2v), distribution="NQ"))
for system in ("quoted", "entailed"):
    records.append(AnnotationRecord(annotator_id="w1", query_id="q0", system=system,
                                    kind="fluency", value=3 if system == "entailed" else 2,
                                    distribution="NQ"))
    records.append(AnnotationRecord(annotator_id="w1", query_id="q0", system=system,
                                    kind="utility", value=3 if system == "entailed" else 2,
                                    distribution="NQ"))

report = build_report(records)
print(render_report_text(report))
