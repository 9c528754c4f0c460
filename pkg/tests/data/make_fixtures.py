"""Builds the checked-in CLI fixtures: inputs, a recorded provider trace,
annotation records, and golden outputs.

Run from the repository root:

    python3 tests/data/make_fixtures.py

The recording pass mirrors the CLI's quoted-generation call sequence with a
scripted provider; the golden pass then runs the real CLI against the
recorded trace. Goldens were inspected by hand before being committed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

DATA = Path(__file__).parent
ROOT = DATA.parent.parent

sys.path.insert(0, str(ROOT / "src"))

from citedqa import alignment, corpus, generation, retrieval  # noqa: E402
from citedqa.cli import run_subcommand  # noqa: E402
from citedqa.metrics import AnnotationRecord, write_records  # noqa: E402
from citedqa.providers import ScriptedProvider, TraceLog  # noqa: E402

FROG_DOC = (
    "The life cycle of a frog consists of three stages: egg, larva, and adult. "
    "As the frog grows, it moves through these stages in a process known as metamorphosis. "
    "Frog eggs are laid in water, often in large clusters called spawn. "
    "Within one to three weeks, the egg is ready to hatch, and a tiny tadpole breaks free. "
    "Tadpoles have rudimentary gills, a mouth, and a long tail. "
    "Most tadpoles feed on algae and other vegetation, so they are considered herbivores. "
    "As the tadpole continues to grow, it begins to develop hind limbs. "
    "The legless tadpoles slowly metamorphose into frogs over the next fourteen weeks. "
    "First they grow back legs, then front legs too. "
    "Soon after, their body starts to change shape, and they are able to start eating insects. "
    "Next, the tails shrink away, and skin grows over their gills as they develop lungs and eardrums. "
    "Once their gills and tails are gone, the young frogs leave the water as tiny adults. "
    "Adult frogs then return to the water each season to lay eggs of their own, "
    "completing the cycle that began in the spring pond. "
    "A female frog can lay thousands of eggs at once, though only a few survive to adulthood. "
    "Herons, fish, and water beetles all prey on eggs and tadpoles throughout the season."
)

MOON_DOC = (
    "Ganymede is the largest and most massive natural satellite of Jupiter, and the largest moon in the solar system. "
    "Ganymede has a diameter of 5,268 km and is 8 percent larger than the planet Mercury. "
    "Unlike Mercury, Ganymede is composed of roughly equal amounts of silicate rock and water ice. "
    "It is the only moon known to have a magnetic field, likely created by convection within its liquid iron core. "
    "Astronomers believe a saltwater ocean lies beneath the icy crust of Ganymede. "
    "Galileo Galilei first observed the moon in January 1610 with three other large satellites of Jupiter. "
    "These four bodies are known today as the Galilean moons in his honor. "
    "Titan, the largest moon of Saturn, is the second largest moon in the solar system. "
    "Titan is the only moon known to have a dense atmosphere, composed mostly of nitrogen. "
    "By comparison, Earth's own moon ranks fifth in size among the satellites of the solar system. "
    "Spacecraft from several agencies have flown past Ganymede, and a dedicated orbiter is on its way. "
    "The European mission is expected to enter orbit around Ganymede in the 2030s, "
    "making it the first spacecraft to orbit a moon other than our own."
)


def main() -> None:
    DATA.mkdir(exist_ok=True)
    queries_in = DATA / "queries.jsonl"
    documents_in = DATA / "documents.jsonl"
    with open(queries_in, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"id": "q-frog", "text": "what is the life cycle of a frog"}) + "\n")
        fh.write(json.dumps({"id": "q-moon", "text": "what is the largest moon in the solar system"}) + "\n")
    with open(documents_in, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"url": "https://example.org/frog-life-cycle", "text": FROG_DOC},
                            ensure_ascii=False) + "\n")
        fh.write(json.dumps({"url": "https://example.org/ganymede-facts", "text": MOON_DOC},
                            ensure_ascii=False) + "\n")

    # stage inputs exactly as the CLI will see them
    work = DATA / "_build"
    work.mkdir(exist_ok=True)
    assert run_subcommand(["ingest", "--queries", str(queries_in), "--distribution", "NQ",
                           "--documents", str(documents_in),
                           "--out-queries", str(work / "queries.jsonl"),
                           "--out-snippets", str(work / "snippets.jsonl")]) == 0
    assert run_subcommand(["retrieve", "--queries", str(work / "queries.jsonl"),
                           "--distribution", "NQ",
                           "--snippets", str(work / "snippets.jsonl"),
                           "--out", str(work / "rankings.jsonl")]) == 0

    queries = corpus.load_queries(work / "queries.jsonl", corpus.Distribution.NQ)
    snippets = {s.id: s for s in corpus.read_snippets(work / "snippets.jsonl")}
    rankings = retrieval.read_rankings(work / "rankings.jsonl")

    def sentences_of(snippet):
        return [u.text for u in alignment.segment_sentences(snippet.text)]

    # scripted responses per query: one subquery reply, then ten drafts of
    # varying quoting quality (draft 7 is the best for q-frog, 4 for q-moon)
    scripted: list[str] = []
    for query in queries:
        ranked = [snippets[r.snippet_id] for r in rankings[query.id]]
        top = ranked[0]
        sents = sentences_of(top)
        scripted.append(query.text.rstrip("?") + "?")
        for i in range(10):
            if i in (3, 7):
                extra = "" if (query.id == "q-frog") == (i == 7) else "with some extra words here "
                scripted.append(f'"{sents[0]}" {extra}Then, "{sents[1]}"')
            elif i == 5:
                scripted.append("Insufficient information to generate a grounded response.")
            else:
                filler = " ".join(f"filler{j}" for j in range(i + 4))
                scripted.append(f'"{sents[0]}" {filler}')

    trace_path = DATA / "trace.jsonl"
    trace_path.unlink(missing_ok=True)
    trace = TraceLog(trace_path)
    provider = ScriptedProvider(scripted, trace=trace)
    for query in queries:
        ranked = [snippets[r.snippet_id] for r in rankings[query.id]]
        query.sub_queries = generation.derive_subqueries(provider, query)
        generation.generate_quoted(provider, query, ranked, n_drafts=10)

    # golden pass: run the real CLI against the recorded trace
    assert run_subcommand(["generate", "--op", "quoted",
                           "--queries", str(work / "queries.jsonl"),
                           "--distribution", "NQ",
                           "--snippets", str(work / "snippets.jsonl"),
                           "--rankings", str(work / "rankings.jsonl"),
                           "--mock-trace", str(trace_path),
                           "--out", str(work / "quoted.jsonl")]) == 0
    golden_quoted = (work / "quoted.jsonl").read_bytes()
    (DATA / "golden_quoted.jsonl").write_bytes(golden_quoted)

    # annotation records consistent with the golden generations
    generations = alignment.read_generations(work / "quoted.jsonl")
    records: list[AnnotationRecord] = []
    t2v = 4000.0
    for g in generations:
        base = dict(query_id=g.query_id, system="quoted", batch="batch-1", distribution="NQ")
        for annotator in ("w1", "w2"):
            records.append(AnnotationRecord(annotator_id=annotator, kind="fluency", value=3, **base))
            records.append(AnnotationRecord(annotator_id=annotator, kind="utility", value=2, **base))
        for unit, cites in zip(g.units, g.citations):
            records.append(AnnotationRecord(annotator_id="w1", kind="coverage",
                                            value=1 if cites else 0, unit_index=unit.index,
                                            t2v_ms=t2v, **base))
            t2v += 1500.0
            for ci in range(len(cites)):
                records.append(AnnotationRecord(annotator_id="w1", kind="precision", value=1,
                                                unit_index=unit.index, citation_index=ci, **base))
    write_records(DATA / "records.jsonl", records)

    assert run_subcommand(["metrics", "--records", str(DATA / "records.jsonl"),
                           "--generations", str(work / "quoted.jsonl"),
                           "--queries", str(work / "queries.jsonl"),
                           "--format", "json",
                           "--out", str(work / "report.json")]) == 0
    (DATA / "golden_report.json").write_bytes((work / "report.json").read_bytes())

    print("fixtures written to", DATA)
    for g in generations:
        print("-", g.query_id, "abstained" if g.abstained else
              f"{len(g.units)} units, {sum(len(c) for c in g.citations)} citations")


if __name__ == "__main__":
    main()
