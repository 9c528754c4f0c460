from __future__ import annotations

import json

import pytest

from citedqa.corpus import Snippet


def make_snippet(sid: str, text: str, url: str = "https://example.org/a") -> Snippet:
    return Snippet(id=sid, source_url=url, text=text, char_span=(0, len(text)), origin="retrieved")


def jsonl(path, objects):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return path


@pytest.fixture
def snippet_factory():
    return make_snippet
