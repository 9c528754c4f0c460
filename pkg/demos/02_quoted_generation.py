"""Best-of-N quoted generation with word-for-word quote alignment.

A scripted provider stands in for the LLM: ten drafts come back, the one
with the fewest unquoted words wins, and every quote is matched back to
its source snippet span.

Run:  python3 demos/02_quoted_generation.py
"""

from citedqa import Distribution, Query, ScriptedProvider, build_quoted, generate_quoted
from citedqa.corpus import Snippet

snippets = [
    Snippet(id="s1", source_url="https://example.org/ganymede",
            text="Ganymede is the largest moon in the solar system. "
                 "Ganymede has a diameter of 5,268 km and is larger than the planet Mercury.",
            char_span=(0, 125), origin="retrieved"),
    Snippet(id="s2", source_url="https://example.org/titan",
            text="Titan is the largest moon of Saturn. It has a dense atmosphere of nitrogen.",
            char_span=(0, 76), origin="retrieved"),
]

query = Query(id="q1", distribution=Distribution.NQ,
              text="what is the largest moon in the solar system")

# drafts vary in how much connective tissue they add around the quotes
drafts = [
    '"Ganymede is the largest moon in the solar system." It is quite famous and often studied closely.',
    '"Ganymede is the largest moon in the solar system." Also, '
    '"Ganymede has a diameter of 5,268 km and is larger than the planet Mercury."',
    'The answer, found in several sources, is that "Ganymede is the largest moon in the solar system."',
] + ['"Titan is the largest moon of Saturn." plus many extra unquoted words here ' + "x " * i
     for i in range(7)]

provider = ScriptedProvider(drafts)
winner = generate_quoted(provider, query, snippets, n_drafts=10)
print("selected draft:")
print(" ", winner.text)
print("unquoted words:", winner.unquoted_word_count)

generation = build_quoted(query.id, winner.text, snippets, abstained=winner.abstained)
print("\nunits and citations:")
for unit, cites in zip(generation.units, generation.citations):
    print(f"  [{unit.index}] {unit.text}")
    for c in cites:
        print(f"       -> {c.snippet_id} span={c.snippet_span}")
