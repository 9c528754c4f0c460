"""Prompt template assets.

Templates live in plain-text files, one per (op, distribution) pair, under
the package's templates/ directory (override with CITEDQA_TEMPLATE_DIR).
File format:

    <instruction text>
    %%
    @query: ...
    @subqueries: ...
    @source:
    <source text, may span lines>
    @source:
    ...
    @response: <exemplar output>
    %%
    @query: ...
    ...

The first block is the instruction; each following block is one few-shot
example. Field lines start with "@name:"; a field's value runs until the
next field or block delimiter. @source and @quote may repeat.

Instructions are shared across distributions for the same op; only the
few-shot examples differ. The loader enforces nothing, but the test suite
checks that property over the bundled assets.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Distribution

TEMPLATE_DIR_ENV = "CITEDQA_TEMPLATE_DIR"

OPS = ("subquery", "quoted", "paraphrased", "entailed", "abstractive", "citation", "posthoc_abstractive")

_REPEATABLE = {"source", "quote"}

SYSTEM_MESSAGE = "Follow the instruction and match the format of the examples exactly."

# Output field label per op, mirrored in rendering and few-shot exemplars.
_OUTPUT_LABEL = {
    "subquery": "Sub-questions",
    "quoted": "Response",
    "paraphrased": "Paraphrased Response",
    "entailed": "Revised Response",
    "abstractive": "Revised Response",
    "citation": "Answer",
    "posthoc_abstractive": "Response",
}


@dataclass
class FewShotExample:
    inputs: dict[str, object] = field(default_factory=dict)
    response: str = ""


@dataclass
class PromptTemplate:
    op: str
    distribution: Distribution | None
    instruction: str
    few_shot_examples: list[FewShotExample] = field(default_factory=list)


def _parse_block(block: str) -> FewShotExample:
    fields: dict[str, object] = {}
    current: str | None = None
    buf: list[str] = []

    def flush():
        nonlocal buf, current
        if current is None:
            return
        value = "\n".join(buf).strip()
        if current in _REPEATABLE:
            fields.setdefault(current, []).append(value)
        else:
            fields[current] = value
        buf = []

    for line in block.splitlines():
        if line.startswith("@"):
            name, _, rest = line[1:].partition(":")
            flush()
            current = name.strip()
            buf = [rest.strip()] if rest.strip() else []
        else:
            buf.append(line)
    flush()
    response = fields.pop("response", "")
    return FewShotExample(inputs=fields, response=str(response))


def parse_template(text: str, op: str, distribution: Distribution | None) -> PromptTemplate:
    blocks = []
    current: list[str] = []
    for line in text.splitlines():
        if line.strip() == "%%":
            blocks.append("\n".join(current))
            current = []
        else:
            current.append(line)
    if current:
        blocks.append("\n".join(current))
    instruction = blocks[0].strip()
    if not instruction:
        raise ValueError(f"template for op {op!r} has an empty instruction")
    examples = [_parse_block(b) for b in blocks[1:] if b.strip()]
    return PromptTemplate(op=op, distribution=distribution, instruction=instruction, few_shot_examples=examples)


class TemplateLibrary:
    """Loads and caches templates from an asset directory."""

    def __init__(self, directory: str | Path | None = None):
        if directory is None:
            directory = os.environ.get(TEMPLATE_DIR_ENV) or Path(__file__).parent / "templates"
        self.directory = Path(directory)
        self._cache: dict[tuple[str, str | None], PromptTemplate] = {}

    def get(self, op: str, distribution: Distribution) -> PromptTemplate:
        if op not in OPS:
            raise ValueError(f"unknown template op {op!r}")
        key = (op, distribution.value)
        if key in self._cache:
            return self._cache[key]
        per_dist = self.directory / f"{op}.{distribution.value}.txt"
        shared = self.directory / f"{op}.txt"
        path = per_dist if per_dist.exists() else shared
        if not path.exists():
            raise FileNotFoundError(f"no template asset for op={op} distribution={distribution.value} in {self.directory}")
        template = parse_template(path.read_text(encoding="utf-8"), op, distribution)
        self._cache[key] = template
        return template


def _sources_block(sources: list[str]) -> str:
    return "\n\n".join(f'"{s}"' for s in sources)


def _quotes_block(quotes: list[str]) -> str:
    return "\n\n".join(f'[{i}] "{q}"' for i, q in enumerate(quotes, start=1))


def _example_body(op: str, inputs: dict) -> str:
    if op == "quoted":
        return (
            f"Query: {inputs.get('query', '')}\n\n"
            f"Sub-questions: {inputs.get('subqueries', inputs.get('query', ''))}\n\n"
            f"Sources:\n\n{_sources_block(list(inputs.get('source', [])))}"
        )
    if op in ("paraphrased", "entailed", "abstractive"):
        return f"Query: {inputs.get('query', '')}\n\nResponse: {inputs.get('input', '')}"
    if op == "citation":
        return f"Text: {inputs.get('text', '')}\n\nQuotes:\n\n{_quotes_block(list(inputs.get('quote', [])))}"
    if op == "subquery":
        return f"Query: {inputs.get('query', '')}"
    if op == "posthoc_abstractive":
        return f"Query: {inputs.get('query', '')}"
    raise ValueError(f"unknown op {op!r}")


def render_prompt(template: PromptTemplate, live_inputs: dict, target_words: int | None = None) -> str:
    """Assemble instruction + few-shot examples + the live item.

    The instruction is repeated before every example, matching the few-shot
    layout the generation quality depends on. posthoc_abstractive
    instructions may carry a {target_words} placeholder.
    """
    instruction = template.instruction
    if target_words is not None:
        instruction = instruction.replace("{target_words}", str(target_words))
    label = _OUTPUT_LABEL[template.op]
    parts = []
    for example in template.few_shot_examples:
        parts.append(
            f"Instruction: {instruction}\n\n"
            f"{_example_body(template.op, example.inputs)}\n\n"
            f"{label}: {example.response}"
        )
    parts.append(
        f"Instruction: {instruction}\n\n"
        f"{_example_body(template.op, live_inputs)}\n\n"
        f"{label}:"
    )
    return "\n\n\n".join(parts)
