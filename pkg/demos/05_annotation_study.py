"""Run an annotation study end to end, in process.

Creates a study, assigns tasks under the no-repeat/balance constraints,
walks one session through the rating -> coverage -> precision screens with
client timestamps, closes the study, and exports anonymized records.

Run:  python3 demos/05_annotation_study.py
"""

from citedqa.evalservice import StudyStore

generation = {
    "query_id": "q1", "system": "quoted",
    "text": '"Ganymede is the largest moon." It orbits Jupiter.',
    "abstained": False,
    "units": [
        {"index": 0, "text": '"Ganymede is the largest moon."', "char_span": [0, 31],
         "requires_citation": True},
        {"index": 1, "text": "It orbits Jupiter.", "char_span": [32, 50], "requires_citation": True},
    ],
    "citations": [
        [{"snippet_id": "s1", "quote_text": "Ganymede is the largest moon.", "snippet_span": [0, 29]}],
        [],
    ],
}

store = StudyStore()
store.create_study({
    "id": "demo-study",
    "systems": ["quoted"],
    "queries": [{"id": "q1", "text": "what is the largest moon", "distribution": "NQ"}],
    "annotators": ["worker-7"],
    "generations": [generation],
    "snippets": [{"id": "s1", "source_url": "https://example.org",
                  "text": "Ganymede is the largest moon. It was found by Galileo.",
                  "char_span": [0, 55], "origin": "retrieved"}],
})
store.assign("demo-study", tasks_per_annotator=1, rng_seed=7)

task = store.next_task("worker-7")
tid = task["task_id"]
print("serving task:", tid, "for query:", task["query_text"])

clock = 0
def fire(event, **payload):
    global clock
    clock += 4_000
    return store.record_event(tid, event, {"client_ms": clock, **payload})

fire("rating_submitted", fluency=3, utility=2)
fire("continue_clicked")                      # opens the unit-0 timer
fire("coverage_submitted", value=1)           # t2v = 4000 ms
fire("precision_submitted", value=1)
fire("continue_clicked")                      # opens the unit-1 timer
out = fire("coverage_submitted", value=0)     # uncited unit, no precision step
print("final screen:", out["session"]["screen"])

store.close("demo-study")
print("\nexported records:")
print(store.export_study("demo-study"))
