"""Post-hoc citation with a support-score threshold, and threshold
calibration against a target citation density.

Run:  python3 demos/03_posthoc_citation.py
"""

from citedqa import DevGeneration, MockGroundingScorer, PosthocConfig, posthoc_cite
from citedqa.citation import calibrate_threshold, calibration_table, render_calibration_table
from citedqa.corpus import Snippet

source = Snippet(
    id="s1", source_url="https://example.org/frogs",
    text="Frogs begin life as eggs laid in water. "
         "Tadpoles hatch from the eggs within weeks. "
         "Adult frogs return to the pond to breed. "
         "Herons prey on tadpoles all season long.",
    char_span=(0, 164), origin="retrieved",
)

scorer = MockGroundingScorer()  # lexical-overlap stand-in for a grounding API
unit = "Frog eggs are laid in the water and hatch into tadpoles."

for alpha in (0.05, 0.5, 0.9):
    cited = posthoc_cite(unit, [source], scorer, PosthocConfig(threshold=alpha))
    print(f"alpha={alpha:>4}: {len(cited)} citations")
    for c in cited:
        print(f"   -> {c.quote_text!r}")

dev = [DevGeneration(unit_texts=[unit, "Adult frogs breed in ponds."], sources=[source])]
grid = [i / 20 for i in range(1, 20)]
rows = calibration_table(dev, scorer, target_cps=1.5, grid=grid)
print()
print(render_calibration_table(rows, "demo"))
print("chosen alpha:", calibrate_threshold(dev, scorer, target_cps=1.5, grid=grid))
