"""Annotation study service.

Creates studies, assigns (annotator, query, system) tasks under the
no-repeat and balance constraints, walks each task session through the
fluency/utility -> coverage -> precision screens, computes T2V from
client-supplied monotonic timestamps, and exports anonymized records in
the metrics module's input format.

Persistence is an append-only per-study event log (write-ahead: the event
is durable before it is applied) plus JSON snapshots; replaying a recorded
event log rebuilds an identical record file.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .alignment import CitedGeneration
from .errors import (
    CitedQaError,
    IllegalTransition,
    InfeasibleLoad,
    StaleSession,
    StudyNotClosed,
)
from .metrics import AnnotationRecord

T2V_OUTLIER_MS = 30 * 60 * 1000
ASSIGN_RESTARTS = 1000

SCREENS = ("fluency_utility", "coverage", "precision", "done")
EVENTS = ("continue_clicked", "coverage_submitted", "precision_submitted", "rating_submitted")


@dataclass
class Assignment:
    task_id: str
    annotator: str
    query_id: str
    system: str


@dataclass
class TaskSession:
    task_id: str
    annotator: str
    query_id: str
    system: str
    eval_units: list[int] = field(default_factory=list)  # citation-requiring unit indices
    screen: str = "fluency_utility"
    unit_cursor: int = 0
    citation_cursor: int = 0
    timer_open_ms: float | None = None
    last_timestamp_ms: float | None = None
    ratings_submitted: bool = False
    revision: int = 0

    @property
    def current_unit(self) -> int | None:
        if self.unit_cursor < len(self.eval_units):
            return self.eval_units[self.unit_cursor]
        return None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "annotator": self.annotator,
            "query_id": self.query_id,
            "system": self.system,
            "screen": self.screen,
            "current_unit": self.current_unit,
            "citation_cursor": self.citation_cursor,
            "timer_open": self.timer_open_ms is not None,
            "ratings_submitted": self.ratings_submitted,
            "revision": self.revision,
        }


def check_assignment(assignment: list[tuple[str, str, str]],
                     systems: list[str] | None = None) -> list[str]:
    """Independent validator: returns human-readable violations, if any.

    When the full system list is given, systems an annotator never saw
    count as 0 toward the balance check.
    """
    violations = []
    seen_pair: dict[tuple[str, str], str] = {}
    seen_cell: set[tuple[str, str]] = set()
    per_annotator: dict[str, dict[str, int]] = {}
    for annotator, query, system in assignment:
        pair = (annotator, query)
        if pair in seen_pair and seen_pair[pair] != system:
            violations.append(f"annotator {annotator} sees query {query} in two systems")
        seen_pair[pair] = system
        cell = (query, system)
        if cell in seen_cell:
            violations.append(f"cell ({query}, {system}) covered twice")
        seen_cell.add(cell)
        per_annotator.setdefault(annotator, {}).setdefault(system, 0)
        per_annotator[annotator][system] += 1
    for annotator, counts in per_annotator.items():
        full = dict.fromkeys(systems, 0) | counts if systems else counts
        if max(full.values()) - min(full.values()) > 1:
            violations.append(f"annotator {annotator} system counts unbalanced: {full}")
    return violations


def assign_tasks(
    queries: list[str],
    systems: list[str],
    annotators: list[str],
    tasks_per_annotator: int,
    rng_seed: int = 0,
) -> list[tuple[str, str, str]]:
    """Randomized (annotator, query, system) assignment.

    Constraints: each (query, system) cell is used at most once, no
    annotator meets a query under two systems, and each annotator's
    per-system task counts differ by at most one. Deterministic for a
    fixed seed. Raises InfeasibleLoad when the counting bounds cannot be
    met or no valid assignment is found within the retry budget.
    """
    n_q, n_s, n_a = len(queries), len(systems), len(annotators)
    total = tasks_per_annotator * n_a
    if tasks_per_annotator < 0 or n_q == 0 or n_s == 0 or n_a == 0:
        raise InfeasibleLoad("empty study dimensions")
    if total > n_q * n_s:
        raise InfeasibleLoad(f"{total} tasks > {n_q * n_s} (query, system) cells")
    if tasks_per_annotator > n_q:
        raise InfeasibleLoad(f"{tasks_per_annotator} tasks exceed {n_q} distinct queries per annotator")

    rng = random.Random(rng_seed)
    base, remainder = divmod(tasks_per_annotator, n_s)

    for _ in range(ASSIGN_RESTARTS):
        free_cells: set[tuple[str, str]] = {(q, s) for q in queries for s in systems}
        result: list[tuple[str, str, str]] = []
        ok = True
        for annotator in annotators:
            extra = rng.sample(range(n_s), remainder)
            targets = {systems[i]: base + (1 if i in extra else 0) for i in range(n_s)}
            taken_queries: set[str] = set()
            picks: list[tuple[str, str, str]] = []
            system_order = list(systems)
            rng.shuffle(system_order)
            for system in system_order:
                candidates = [q for q in queries if (q, system) in free_cells and q not in taken_queries]
                need = targets[system]
                if len(candidates) < need:
                    ok = False
                    break
                for q in rng.sample(candidates, need):
                    picks.append((annotator, q, system))
                    taken_queries.add(q)
            if not ok:
                break
            for _, q, s in picks:
                free_cells.discard((q, s))
            result.extend(picks)
        if ok:
            return result
    raise InfeasibleLoad("no valid assignment found within the retry budget")


@dataclass
class Study:
    id: str
    systems: list[str]
    queries: list[str]
    annotators: list[str]
    batch: str = "batch-1"
    state: str = "draft"
    assignment: list[Assignment] = field(default_factory=list)
    query_texts: dict[str, str] = field(default_factory=dict)
    distributions: dict[str, str] = field(default_factory=dict)
    generations: dict[tuple[str, str], dict] = field(default_factory=dict)
    snippets: dict[str, dict] = field(default_factory=dict)
    sessions: dict[str, TaskSession] = field(default_factory=dict)
    records: list[AnnotationRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "systems": self.systems,
            "queries": self.queries,
            "annotators": self.annotators,
            "batch": self.batch,
            "state": self.state,
            "assignment": [
                {"task_id": a.task_id, "annotator": a.annotator, "query_id": a.query_id, "system": a.system}
                for a in self.assignment
            ],
        }


class StudyStore:
    """In-memory studies with an optional on-disk event log per study."""

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root else None
        if self.root:
            self.root.mkdir(parents=True, exist_ok=True)
        self.studies: dict[str, Study] = {}
        self._lock = threading.Lock()
        self._session_index: dict[str, str] = {}  # task_id -> study_id

    # -- study lifecycle ---------------------------------------------------

    def create_study(self, payload: dict) -> Study:
        with self._lock:
            study_id = payload.get("id") or f"study-{len(self.studies) + 1:03d}"
            if study_id in self.studies:
                raise CitedQaError(f"study {study_id!r} already exists")
            queries = payload.get("queries", [])
            study = Study(
                id=study_id,
                systems=list(payload.get("systems", [])),
                queries=[q["id"] if isinstance(q, dict) else q for q in queries],
                annotators=list(payload.get("annotators", [])),
                batch=payload.get("batch", "batch-1"),
            )
            for q in queries:
                if isinstance(q, dict):
                    study.query_texts[q["id"]] = q.get("text", "")
                    if q.get("distribution"):
                        study.distributions[q["id"]] = q["distribution"]
            for g in payload.get("generations", []):
                study.generations[(g["query_id"], g["system"])] = g
            for s in payload.get("snippets", []):
                study.snippets[s["id"]] = s
            self.studies[study_id] = study
            self._persist_event(study, {"type": "study_created", "payload": payload})
            return study

    def _study(self, study_id: str) -> Study:
        study = self.studies.get(study_id)
        if study is None:
            raise KeyError(study_id)
        return study

    def assign(self, study_id: str, tasks_per_annotator: int, rng_seed: int = 0) -> Study:
        with self._lock:
            study = self._study(study_id)
            triples = assign_tasks(study.queries, study.systems, study.annotators,
                                   tasks_per_annotator, rng_seed)
            study.assignment = [
                Assignment(task_id=f"{study_id}-t{i:05d}", annotator=a, query_id=q, system=s)
                for i, (a, q, s) in enumerate(triples)
            ]
            for a in study.assignment:
                generation = study.generations.get((a.query_id, a.system))
                eval_units = []
                if generation:
                    eval_units = [u["index"] for u in generation.get("units", [])
                                  if u.get("requires_citation", True)]
                session = TaskSession(task_id=a.task_id, annotator=a.annotator,
                                      query_id=a.query_id, system=a.system, eval_units=eval_units)
                study.sessions[a.task_id] = session
                self._session_index[a.task_id] = study_id
            study.state = "active"
            self._persist_event(study, {"type": "assigned",
                                        "payload": {"tasks_per_annotator": tasks_per_annotator,
                                                    "rng_seed": rng_seed}})
            self._snapshot_study(study)
            return study

    def close(self, study_id: str) -> Study:
        with self._lock:
            study = self._study(study_id)
            study.state = "closed"
            self._persist_event(study, {"type": "closed", "payload": {}})
            self._snapshot_study(study)
            return study

    # -- task serving --------------------------------------------------------

    def task_payload(self, task_id: str) -> dict:
        study = self._study(self._session_index[task_id])
        session = study.sessions[task_id]
        generation = study.generations.get((session.query_id, session.system), {})
        cited_snippet_ids = {c["snippet_id"] for per_unit in generation.get("citations", [])
                             for c in per_unit}
        sources = [study.snippets[sid] for sid in sorted(cited_snippet_ids) if sid in study.snippets]
        return {
            "task_id": task_id,
            "annotator": session.annotator,
            "query_id": session.query_id,
            "query_text": study.query_texts.get(session.query_id, ""),
            "distribution": study.distributions.get(session.query_id),
            "system": session.system,
            "generation": generation,
            "sources": sources,
            "session": session.to_dict(),
        }

    def next_task(self, annotator: str) -> dict | None:
        for study in self.studies.values():
            if study.state != "active":
                continue
            for a in study.assignment:
                if a.annotator != annotator:
                    continue
                if study.sessions[a.task_id].screen != "done":
                    return self.task_payload(a.task_id)
        return None

    # -- events ----------------------------------------------------------------

    def record_event(self, task_id: str, event: str, payload: dict) -> dict:
        """Apply one session event; the event is persisted before applying."""
        if event not in EVENTS:
            raise IllegalTransition(f"unknown event {event!r}")
        with self._lock:
            study = self._study(self._session_index[task_id])
            session = study.sessions[task_id]
            self._persist_event(study, {"type": "task_event", "task_id": task_id,
                                        "event": event, "payload": payload})
            new_records = self._apply(study, session, event, payload)
            study.records.extend(new_records)
            if self.root:
                with open(self.root / f"{study.id}.records.jsonl", "a", encoding="utf-8") as fh:
                    for r in new_records:
                        fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
            return {"session": session.to_dict(),
                    "records_appended": [r.to_dict() for r in new_records]}

    def _apply(self, study: Study, session: TaskSession, event: str, payload: dict) -> list[AnnotationRecord]:
        expected = payload.get("revision")
        if expected is not None and expected != session.revision:
            raise StaleSession(f"expected revision {session.revision}, got {expected}")
        ts = payload.get("client_ms")
        if ts is None:
            raise IllegalTransition("event payload needs a client_ms timestamp")
        ts = float(ts)
        if session.last_timestamp_ms is not None and ts < session.last_timestamp_ms:
            raise IllegalTransition(f"timestamp {ts} precedes {session.last_timestamp_ms}")

        distribution = study.distributions.get(session.query_id)
        base = dict(annotator_id=session.annotator, query_id=session.query_id,
                    system=session.system, batch=study.batch, distribution=distribution)
        generation = study.generations.get((session.query_id, session.system), {})
        records: list[AnnotationRecord] = []

        if event == "rating_submitted":
            if session.screen != "fluency_utility":
                raise IllegalTransition(f"rating_submitted illegal on screen {session.screen}")
            fluency = int(payload["fluency"])
            utility = int(payload["utility"])
            records.append(AnnotationRecord(kind="fluency", value=fluency, **base))
            records.append(AnnotationRecord(kind="utility", value=utility, **base))
            session.ratings_submitted = True

        elif event == "continue_clicked":
            if session.screen == "fluency_utility":
                if not session.ratings_submitted:
                    raise IllegalTransition("continue before ratings are submitted")
                if session.current_unit is None:
                    session.screen = "done"
                else:
                    session.screen = "coverage"
                    session.timer_open_ms = ts
            elif session.screen == "coverage" and session.timer_open_ms is None:
                session.timer_open_ms = ts
            else:
                raise IllegalTransition(f"continue_clicked illegal on screen {session.screen}")

        elif event == "coverage_submitted":
            if session.screen != "coverage" or session.timer_open_ms is None:
                raise IllegalTransition("coverage_submitted without an open timer")
            t2v_ms = ts - session.timer_open_ms
            label = payload.get("label")
            if t2v_ms > T2V_OUTLIER_MS:
                label = (label + ";" if label else "") + "t2v_outlier"
            records.append(AnnotationRecord(kind="coverage", value=int(payload["value"]),
                                            unit_index=session.current_unit, t2v_ms=t2v_ms,
                                            label=label, **base))
            session.timer_open_ms = None
            citations = generation.get("citations", [])
            unit = session.current_unit
            n_citations = len(citations[unit]) if unit is not None and unit < len(citations) else 0
            if n_citations:
                session.screen = "precision"
                session.citation_cursor = 0
            else:
                self._advance_unit(session)

        elif event == "precision_submitted":
            if session.screen != "precision":
                raise IllegalTransition(f"precision_submitted illegal on screen {session.screen}")
            unit = session.current_unit
            records.append(AnnotationRecord(kind="precision", value=int(payload["value"]),
                                            unit_index=unit, citation_index=session.citation_cursor,
                                            label=payload.get("label"), **base))
            citations = generation.get("citations", [])
            n_citations = len(citations[unit]) if unit is not None and unit < len(citations) else 0
            session.citation_cursor += 1
            if session.citation_cursor >= n_citations:
                self._advance_unit(session)

        for r in records:
            r.validate()
        session.last_timestamp_ms = ts
        session.revision += 1
        return records

    @staticmethod
    def _advance_unit(session: TaskSession) -> None:
        session.unit_cursor += 1
        session.citation_cursor = 0
        if session.current_unit is None:
            session.screen = "done"
        else:
            session.screen = "coverage"  # timer stays closed until continue_clicked

    # -- export -------------------------------------------------------------------

    def export_study(self, study_id: str, anonymize: bool = True) -> str:
        study = self._study(study_id)
        if study.state != "closed":
            raise StudyNotClosed(f"study {study_id!r} is {study.state}")
        lines = [f"# study {study_id} annotation records"]
        for record in study.records:
            obj = record.to_dict()
            if anonymize:
                obj["annotator_id"] = self._pseudonym(study_id, record.annotator_id)
            lines.append(json.dumps(obj, ensure_ascii=False))
        return "\n".join(lines) + "\n"

    @staticmethod
    def _pseudonym(study_id: str, annotator_id: str) -> str:
        digest = hashlib.sha256(f"{study_id}:{annotator_id}".encode("utf-8")).hexdigest()
        return f"ann-{digest[:10]}"

    # -- persistence -------------------------------------------------------------

    def _persist_event(self, study: Study, entry: dict) -> None:
        if not self.root:
            return
        with open(self.root / f"{study.id}.events.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")

    def _snapshot_study(self, study: Study) -> None:
        if not self.root:
            return
        path = self.root / f"{study.id}.snapshot.json"
        path.write_text(json.dumps(study.to_dict(), ensure_ascii=False, indent=2), encoding="utf-8")

    def snapshot(self) -> None:
        for study in self.studies.values():
            self._snapshot_study(study)

    @classmethod
    def replay(cls, events_path: str | Path) -> "StudyStore":
        """Rebuild a store by replaying a recorded event log."""
        store = cls()
        raw = Path(events_path).read_text(encoding="utf-8")
        study_id: str | None = None
        pending_assign: dict | None = None
        for line in raw.splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            if entry["type"] == "study_created":
                study = store.create_study(entry["payload"])
                study_id = study.id
            elif entry["type"] == "assigned":
                pending_assign = entry["payload"]
                store.assign(study_id, pending_assign["tasks_per_annotator"], pending_assign["rng_seed"])
            elif entry["type"] == "task_event":
                store.record_event(entry["task_id"], entry["event"], entry["payload"])
            elif entry["type"] == "closed":
                store.close(study_id)
        return store


def create_app(store: StudyStore | None = None, token: str | None = None):
    """FastAPI app exposing the study endpoints."""
    from fastapi import FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, PlainTextResponse

    store = store or StudyStore()
    app = FastAPI(title="citedqa annotation service")
    app.state.store = store
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    def error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})

    @app.middleware("http")
    async def _auth(request: Request, call_next):
        if token and request.headers.get("authorization") != f"Bearer {token}":
            return error(401, "unauthorized", "missing or invalid bearer token")
        return await call_next(request)

    @app.exception_handler(CitedQaError)
    async def _domain_error(_request, exc: CitedQaError):
        status = 409 if isinstance(exc, (IllegalTransition, StaleSession, StudyNotClosed)) else 400
        return error(status, exc.code, str(exc))

    @app.exception_handler(KeyError)
    async def _missing(_request, exc: KeyError):
        return error(404, "not_found", f"unknown id {exc.args[0]!r}" if exc.args else "not found")

    @app.post("/studies")
    async def create_study(payload: dict):
        return store.create_study(payload).to_dict()

    @app.post("/studies/{study_id}/assign")
    async def assign(study_id: str, payload: dict):
        tasks = int(payload.get("tasks_per_annotator", 0))
        seed = int(payload.get("rng_seed", 0))
        return store.assign(study_id, tasks, seed).to_dict()

    @app.get("/tasks/next")
    async def next_task(annotator: str):
        payload = store.next_task(annotator)
        if payload is None:
            return error(404, "no_task", f"no open task for annotator {annotator!r}")
        return payload

    @app.get("/tasks/{task_id}")
    async def get_task(task_id: str):
        return store.task_payload(task_id)

    @app.post("/tasks/{task_id}/events")
    async def post_event(task_id: str, payload: dict):
        return store.record_event(task_id, payload.get("event", ""), payload.get("payload", {}))

    @app.post("/studies/{study_id}/close")
    async def close(study_id: str):
        return store.close(study_id).to_dict()

    @app.get("/studies/{study_id}/export")
    async def export(study_id: str, anonymize: bool = True):
        return PlainTextResponse(store.export_study(study_id, anonymize=anonymize))

    return app
