"""Command-line entry point.

Subcommands: ingest, retrieve, generate, cite, audit, calibrate, metrics,
serve, export. Exit codes: 0 success, 1 input error, 2 provider/scorer
failure, 3 internal invariant violation. Outputs are written only on
success; every artifact-producing run also writes a manifest whose id is a
hash of the configuration, so identical configurations (seeds and mock
traces included) yield byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import alignment, citation, corpus, generation, metrics, retrieval
from .errors import CitedQaError, ProviderExhausted, ScorerUnavailable
from .providers import HttpChatProvider, ReplayProvider, TraceLog
from .templates import TemplateLibrary

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PROVIDER = 2
EXIT_INVARIANT = 3


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    seed: int | None = None
    endpoints: dict = field(default_factory=dict)

    @property
    def manifest_id(self) -> str:
        canonical = json.dumps(
            {"command": self.command, "config": self.config, "inputs": self.inputs,
             "outputs": self.outputs, "seed": self.seed, "endpoints": self.endpoints},
            sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def write(self, out_path: str | Path) -> None:
        path = Path(str(out_path) + ".manifest.json")
        body = {
            "manifest_id": self.manifest_id,
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seed": self.seed,
            "endpoints": self.endpoints,
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        path.write_text(json.dumps(body, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def _load_config_overrides(args: argparse.Namespace) -> None:
    """KEY=VALUE lines in --config override parsed flags."""
    if not getattr(args, "config", None):
        return
    for line_no, line in enumerate(Path(args.config).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CitedQaError(f"config line {line_no}: expected KEY=VALUE, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if hasattr(args, key):
            current = getattr(args, key)
            if isinstance(current, bool):
                value = value.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(value)
            elif isinstance(current, float):
                value = float(value)
            setattr(args, key, value)


def _provider(args: argparse.Namespace):
    if getattr(args, "mock_trace", None):
        return ReplayProvider(args.mock_trace)
    endpoint = getattr(args, "provider_endpoint", None)
    return HttpChatProvider(endpoint=endpoint, model=getattr(args, "model", None))


def _snippet_lookup(snippets: list[corpus.Snippet]) -> dict[str, corpus.Snippet]:
    return {s.id: s for s in snippets}


def _ranked_snippets(query_id: str, rankings, lookup) -> list[corpus.Snippet]:
    ranked = rankings.get(query_id, [])
    return [lookup[r.snippet_id] for r in ranked if r.snippet_id in lookup]


def cmd_ingest(args) -> int:
    distribution = corpus.Distribution.parse(args.distribution)
    queries, gold = corpus.read_query_file(args.queries, distribution)
    snippets = list(gold)
    if args.documents:
        for line in Path(args.documents).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            doc = corpus.SourceDocument(url=obj["url"], text=obj["text"])
            if doc.text:
                snippets.extend(corpus.chunk_document(doc, target_len=args.target_len))
    corpus.write_queries(args.out_queries, queries)
    corpus.write_snippets(args.out_snippets, snippets)
    manifest = RunManifest(command="ingest",
                           config={"distribution": args.distribution, "target_len": args.target_len},
                           inputs=[args.queries] + ([args.documents] if args.documents else []),
                           outputs=[args.out_queries, args.out_snippets], seed=args.seed)
    manifest.write(args.out_queries)
    print(f"ingested {len(queries)} queries, {len(snippets)} snippets", file=sys.stderr)
    return EXIT_OK


def cmd_retrieve(args) -> int:
    distribution = corpus.Distribution.parse(args.distribution)
    queries = corpus.load_queries(args.queries, distribution)
    snippets = corpus.read_snippets(args.snippets)
    if args.scorer == "embedding":
        scorer = retrieval.EmbeddingScorer(endpoint=args.endpoint)
    else:
        scorer = retrieval.LexicalScorer(use_idf=args.idf)
    lookup = _snippet_lookup(snippets)
    rankings = {}
    for query in queries:
        pool = [lookup[sid] for sid in query.gold_snippet_ids if sid in lookup]
        if not pool:
            pool = snippets
        rankings[query.id] = retrieval.top_k(scorer, query, pool, k=args.top_k)
    retrieval.write_rankings(args.out, rankings)
    RunManifest(command="retrieve",
                config={"scorer": args.scorer, "top_k": args.top_k, "idf": args.idf},
                inputs=[args.queries, args.snippets], outputs=[args.out], seed=args.seed,
                endpoints={"scorer": args.endpoint} if args.endpoint else {}).write(args.out)
    print(f"ranked snippets for {len(rankings)} queries", file=sys.stderr)
    return EXIT_OK


def cmd_generate(args) -> int:
    distribution = corpus.Distribution.parse(args.distribution)
    queries = corpus.load_queries(args.queries, distribution)
    templates = TemplateLibrary(args.template_dir)
    provider = _provider(args)
    out: list[alignment.CitedGeneration] = []

    if args.op == "extractive":
        snippets = corpus.read_snippets(args.snippets)
        rankings = retrieval.read_rankings(args.rankings)
        lookup = _snippet_lookup(snippets)
        for query in queries:
            ranked = _ranked_snippets(query.id, rankings, lookup)
            out.append(alignment.build_extractive(query.id, ranked))
    elif args.op == "quoted":
        snippets = corpus.read_snippets(args.snippets)
        rankings = retrieval.read_rankings(args.rankings)
        lookup = _snippet_lookup(snippets)
        for query in queries:
            ranked = _ranked_snippets(query.id, rankings, lookup)
            if not ranked:
                out.append(alignment.CitedGeneration(query_id=query.id, system=alignment.System.QUOTED,
                                                     text="", abstained=True))
                continue
            if query.sub_queries is None:
                query.sub_queries = generation.derive_subqueries(provider, query, templates)
            draft = generation.generate_quoted(provider, query, ranked, n_drafts=args.drafts,
                                               templates=templates)
            out.append(alignment.build_quoted(query.id, draft.text, ranked, abstained=draft.abstained))
    elif args.op in ("paraphrased", "entailed", "abstractive"):
        quoted = {g.query_id: g for g in alignment.read_generations(args.from_quoted)}
        for query in queries:
            source = quoted.get(query.id)
            if source is None or source.abstained:
                out.append(alignment.CitedGeneration(query_id=query.id,
                                                     system=alignment.System.parse(args.op),
                                                     text="", abstained=True))
                continue
            text = generation.derive_op(provider, query, source, args.op, templates=templates)
            units = alignment.segment_sentences(text) if text.strip() else []
            out.append(alignment.CitedGeneration(query_id=query.id, system=alignment.System.parse(args.op),
                                                 text=text, units=units, citations=[[] for _ in units]))
    elif args.op == "posthoc_abstractive":
        for query in queries:
            text = generation.generate_abstractive_direct(provider, query, target_words=args.target_words,
                                                          templates=templates)
            units = alignment.segment_sentences(text) if text.strip() else []
            out.append(alignment.CitedGeneration(query_id=query.id,
                                                 system=alignment.System.POSTHOC_ABSTRACTIVE,
                                                 text=text, units=units, citations=[[] for _ in units]))
    else:
        raise CitedQaError(f"unknown op {args.op!r}")

    alignment.write_generations(args.out, out)
    RunManifest(command="generate",
                config={"op": args.op, "drafts": args.drafts, "distribution": args.distribution},
                inputs=[p for p in (args.queries, args.snippets, args.rankings, args.from_quoted,
                                    args.mock_trace) if p],
                outputs=[args.out], seed=args.seed).write(args.out)
    print(f"generated {len(out)} {args.op} responses", file=sys.stderr)
    return EXIT_OK


def _quote_candidates(quoted: alignment.CitedGeneration) -> list[alignment.CitedQuote]:
    """Quotes used by a quoted generation, first-appearance order, deduped."""
    seen: set[str] = set()
    candidates = []
    for per_unit in quoted.citations:
        for cited in per_unit:
            key = alignment.normalize(cited.quote_text)
            if key and key not in seen:
                seen.add(key)
                candidates.append(cited)
    return candidates


def cmd_cite(args) -> int:
    distribution = corpus.Distribution.parse(args.distribution)
    generations = alignment.read_generations(args.generations)
    templates = TemplateLibrary(args.template_dir)

    if args.mode == "prompted":
        provider = _provider(args)
        quoted = {g.query_id: g for g in alignment.read_generations(args.from_quoted)}
        for g in generations:
            if g.abstained:
                continue
            source = quoted.get(g.query_id)
            candidates = _quote_candidates(source) if source else []
            g.citations = []
            for unit in g.units:
                unit.requires_citation = citation.requires_citation(unit.text)
                if not candidates or not unit.requires_citation:
                    g.citations.append([])
                    continue
                markers = citation.identify_citations(provider, unit.text,
                                                      [c.quote_text for c in candidates],
                                                      distribution, templates=templates)
                g.citations.append([candidates[k - 1] for k in markers.indices])
    elif args.mode == "posthoc":
        snippets = corpus.read_snippets(args.snippets)
        rankings = retrieval.read_rankings(args.rankings)
        lookup = _snippet_lookup(snippets)
        scorer = (citation.HttpGroundingScorer(args.scorer_endpoint)
                  if args.scorer_endpoint else citation.MockGroundingScorer())
        config = (citation.PosthocConfig(args.threshold) if args.threshold is not None
                  else citation.PosthocConfig.default_for(distribution))
        for g in generations:
            if g.abstained:
                continue
            sources = _ranked_snippets(g.query_id, rankings, lookup)
            g.citations = []
            for unit in g.units:
                cited = citation.posthoc_cite(unit.text, sources, scorer, config)
                if not cited:
                    unit.requires_citation = citation.requires_citation(unit.text)
                g.citations.append(cited)
    elif args.mode == "markers":
        snippets = corpus.read_snippets(args.snippets)
        rankings = retrieval.read_rankings(args.rankings)
        lookup = _snippet_lookup(snippets)
        for i, g in enumerate(generations):
            sources = _ranked_snippets(g.query_id, rankings, lookup)
            parsed = citation.parse_external_generation(g.text, sources)
            parsed.query_id = g.query_id
            generations[i] = parsed
    else:
        raise CitedQaError(f"unknown cite mode {args.mode!r}")

    alignment.write_generations(args.out, generations)
    RunManifest(command="cite",
                config={"mode": args.mode, "distribution": args.distribution,
                        "threshold": args.threshold},
                inputs=[p for p in (args.generations, args.snippets, args.rankings,
                                    args.from_quoted, args.mock_trace) if p],
                outputs=[args.out], seed=args.seed).write(args.out)
    print(f"cited {len(generations)} generations ({args.mode})", file=sys.stderr)
    return EXIT_OK


def cmd_audit(args) -> int:
    generations = alignment.read_generations(args.generations)
    snippets = {s.id: s for s in corpus.read_snippets(args.snippets)} if args.snippets else {}
    problems: list[str] = []
    for g in generations:
        label = f"({g.query_id}, {g.system.value})"
        if g.abstained:
            continue
        if len(g.units) != len(g.citations):
            problems.append(f"{label}: {len(g.units)} units vs {len(g.citations)} citation lists")
            continue
        last_end = 0
        for unit, per_unit in zip(g.units, g.citations):
            s, e = unit.char_span
            if s < last_end or g.text[s:e] != unit.text:
                problems.append(f"{label}: unit {unit.index} span broken")
            last_end = e
            for cited in per_unit:
                if snippets and cited.snippet_id not in snippets:
                    problems.append(f"{label}: unknown snippet {cited.snippet_id}")
                    continue
                nq = alignment.normalize(cited.quote_text)
                if g.system == alignment.System.QUOTED and nq not in alignment.normalize(unit.text):
                    problems.append(f"{label}: quote not inside unit {unit.index}")
                if snippets and nq not in alignment.normalize(snippets[cited.snippet_id].text):
                    problems.append(f"{label}: quote not inside snippet {cited.snippet_id}")
            if g.system == alignment.System.EXTRACTIVE:
                if len(per_unit) != 1 or per_unit[0].quote_text != unit.text:
                    problems.append(f"{label}: extractive unit {unit.index} breaks |Q_i|=1, u_i=q_i1")
    report = "\n".join(problems) if problems else "audit clean"
    if args.out:
        Path(args.out).write_text(report + "\n", encoding="utf-8")
    print(report, file=sys.stderr)
    return EXIT_INVARIANT if problems else EXIT_OK


def cmd_calibrate(args) -> int:
    distribution = corpus.Distribution.parse(args.distribution)
    generations = alignment.read_generations(args.generations)
    snippets = corpus.read_snippets(args.snippets)
    rankings = retrieval.read_rankings(args.rankings)
    lookup = _snippet_lookup(snippets)
    dev = []
    for g in generations:
        if g.abstained:
            continue
        sources = _ranked_snippets(g.query_id, rankings, lookup)
        dev.append(citation.DevGeneration(unit_texts=[u.text for u in g.units], sources=sources))
    scorer = (citation.HttpGroundingScorer(args.scorer_endpoint)
              if args.scorer_endpoint else citation.MockGroundingScorer())
    grid = [float(x) for x in args.grid.split(",")]
    rows = citation.calibration_table(dev, scorer, args.target_cps, grid)
    alpha = citation.calibrate_threshold(dev, scorer, args.target_cps, grid)
    table = citation.render_calibration_table(rows, distribution.value)
    table += f"chosen alpha: {alpha}\n"
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    print(table, end="", file=sys.stderr)
    print(alpha)
    return EXIT_OK


def cmd_metrics(args) -> int:
    records = metrics.read_records(args.records)
    generations = alignment.read_generations(args.generations) if args.generations else []
    lookup = {}
    if args.queries:
        for line in Path(args.queries).read_text(encoding="utf-8").splitlines():
            if line.strip() and not line.lstrip().startswith("#"):
                obj = json.loads(line)
                lookup[obj["id"]] = obj.get("distribution", "all")
    report = metrics.build_report(records, generations, query_distributions=lookup or None)
    if args.format == "json":
        body = json.dumps(report.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    else:
        body = metrics.render_report_text(report)
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
        RunManifest(command="metrics", config={"format": args.format},
                    inputs=[p for p in (args.records, args.generations, args.queries) if p],
                    outputs=[args.out], seed=args.seed).write(args.out)
    else:
        print(body, end="")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .evalservice import StudyStore, create_app

    store = StudyStore(root=args.state_dir)
    app = create_app(store, token=args.token)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_export(args) -> int:
    from .evalservice import StudyStore

    events = Path(args.state_dir) / f"{args.study}.events.jsonl"
    if not events.exists():
        raise CitedQaError(f"no event log for study {args.study!r} in {args.state_dir}")
    store = StudyStore.replay(events)
    body = store.export_study(args.study, anonymize=not args.no_anonymize)
    Path(args.out).write_text(body, encoding="utf-8")
    print(f"exported study {args.study} to {args.out}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="citedqa", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mock-trace", default=None, help="replay provider calls from this trace file")
        p.add_argument("--out", default=None)
        p.add_argument("--config", default=None, help="KEY=VALUE file overriding flags")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--format", choices=("table", "json"), default="table")
        p.add_argument("--template-dir", default=None)
        p.add_argument("--provider-endpoint", default=None)
        p.add_argument("--model", default=None)
        return p

    p = common(sub.add_parser("ingest", help="load queries and chunk documents into snippets"))
    p.add_argument("--queries", required=True)
    p.add_argument("--distribution", required=True)
    p.add_argument("--documents", default=None)
    p.add_argument("--target-len", type=int, default=1000)
    p.add_argument("--out-queries", required=True)
    p.add_argument("--out-snippets", required=True)

    p = common(sub.add_parser("retrieve", help="rank snippets per query"))
    p.add_argument("--queries", required=True)
    p.add_argument("--distribution", required=True)
    p.add_argument("--snippets", required=True)
    p.add_argument("--scorer", choices=("lexical", "embedding"), default="lexical")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--idf", action="store_true")

    p = common(sub.add_parser("generate", help="produce generations for one operating point"))
    p.add_argument("--op", required=True,
                   choices=("extractive", "quoted", "paraphrased", "entailed", "abstractive",
                            "posthoc_abstractive"))
    p.add_argument("--queries", required=True)
    p.add_argument("--distribution", required=True)
    p.add_argument("--snippets", default=None)
    p.add_argument("--rankings", default=None)
    p.add_argument("--from-quoted", default=None)
    p.add_argument("--drafts", type=int, default=10)
    p.add_argument("--target-words", type=int, default=None)

    p = common(sub.add_parser("cite", help="attach citations to generations"))
    p.add_argument("--mode", required=True, choices=("prompted", "posthoc", "markers"))
    p.add_argument("--generations", required=True)
    p.add_argument("--distribution", required=True)
    p.add_argument("--snippets", default=None)
    p.add_argument("--rankings", default=None)
    p.add_argument("--from-quoted", default=None)
    p.add_argument("--scorer-endpoint", default=None)
    p.add_argument("--threshold", type=float, default=None)

    p = common(sub.add_parser("audit", help="check stored generations against invariants"))
    p.add_argument("--generations", required=True)
    p.add_argument("--snippets", default=None)

    p = common(sub.add_parser("calibrate", help="pick a post-hoc citation threshold"))
    p.add_argument("--generations", required=True)
    p.add_argument("--distribution", required=True)
    p.add_argument("--snippets", required=True)
    p.add_argument("--rankings", required=True)
    p.add_argument("--target-cps", type=float, required=True)
    p.add_argument("--grid", default="0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95")
    p.add_argument("--scorer-endpoint", default=None)

    p = common(sub.add_parser("metrics", help="aggregate annotation records into a report"))
    p.add_argument("--records", required=True)
    p.add_argument("--generations", default=None)
    p.add_argument("--queries", default=None)

    p = common(sub.add_parser("serve", help="run the annotation HTTP service"))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8400)
    p.add_argument("--state-dir", required=True)
    p.add_argument("--token", default=None)

    p = common(sub.add_parser("export", help="export a closed study's records"))
    p.add_argument("--state-dir", required=True)
    p.add_argument("--study", required=True)
    p.add_argument("--no-anonymize", action="store_true")

    return parser


_HANDLERS = {
    "ingest": cmd_ingest,
    "retrieve": cmd_retrieve,
    "generate": cmd_generate,
    "cite": cmd_cite,
    "audit": cmd_audit,
    "calibrate": cmd_calibrate,
    "metrics": cmd_metrics,
    "serve": cmd_serve,
    "export": cmd_export,
}


def run_subcommand(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        _load_config_overrides(args)
        return _HANDLERS[args.command](args)
    except (ProviderExhausted, ScorerUnavailable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except CitedQaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AssertionError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


def main() -> None:
    sys.exit(run_subcommand(sys.argv[1:]))


if __name__ == "__main__":
    main()
