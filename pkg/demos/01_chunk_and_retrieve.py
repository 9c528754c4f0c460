"""Chunk a scraped document into ~1000-character snippets and rank them.

Run:  python3 demos/01_chunk_and_retrieve.py
"""

from citedqa import Distribution, LexicalScorer, Query, SourceDocument, chunk_document, top_k

document = SourceDocument(
    url="https://example.org/ganymede",
    text=(
        "Ganymede is the largest moon in the solar system. "
        "It has a diameter of 5,268 km and is 8 percent larger than the planet Mercury. "
        "A saltwater ocean likely lies beneath its icy crust. " * 8
        + "Titan is the largest moon of Saturn and has a dense nitrogen atmosphere. " * 6
    ),
)

snippets = chunk_document(document, target_len=400)
print(f"document of {len(document.text)} chars -> {len(snippets)} snippets")
for s in snippets:
    print(f"  {s.id}  span={s.char_span}  {s.text[:60]!r}...")

# snippet texts concatenate back to the document exactly
assert "".join(s.text for s in snippets) == document.text

query = Query(id="q1", distribution=Distribution.NQ, text="what is the largest moon in the solar system")
ranked = top_k(LexicalScorer(), query, snippets, k=3)
print("\ntop-3 snippets for:", query.text)
for r in ranked:
    print(f"  {r.snippet_id}  score={r.score:.3f}")
