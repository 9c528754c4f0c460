from __future__ import annotations

import json
import random

import httpx
import pytest

from citedqa.corpus import Distribution, Query
from citedqa.errors import ScorerUnavailable
from citedqa.retrieval import (
    EmbeddingScorer,
    LexicalScorer,
    read_rankings,
    score,
    top_k,
    tokenize,
    write_rankings,
)

from conftest import make_snippet


def make_query(text: str) -> Query:
    return Query(id="q", distribution=Distribution.NQ, text=text)


class TestLexicalScore:
    def test_self_match_positive_and_maximal(self):
        scorer = LexicalScorer()
        query = "jupiter largest moon"
        pool = ["jupiter largest moon", "saturn has rings", "the largest lake", "moon phases chart"]
        scores = [scorer.score(query, t) for t in pool]
        assert scores[0] > 0
        assert scores[0] == max(scores)
        assert all(scores[0] > s for s in scores[1:])

    def test_disjoint_vocabulary_scores_zero(self):
        scorer = LexicalScorer()
        assert scorer.score("frog life cycle", "tax filing deadline") == 0.0

    def test_hand_computed_ordering(self):
        # oracle: per-token saturation tf(k1+1)/(tf+k1) with tf=1 -> 1.0/token
        scorer = LexicalScorer()
        query = "a b"
        ranked = sorted(["a b", "a", "c"], key=lambda t: -scorer.score(query, t))
        assert ranked == ["a b", "a", "c"]
        assert scorer.score(query, "a b") == pytest.approx(2.0)
        assert scorer.score(query, "a") == pytest.approx(1.0)
        assert scorer.score(query, "c") == 0.0

    def test_score_zero_iff_no_shared_token(self):
        scorer = LexicalScorer()
        assert scorer.score("alpha beta", "beta!") > 0
        assert scorer.score("alpha beta", "gamma delta") == 0.0

    def test_tokenize_lowercases_and_splits(self):
        assert tokenize("It's 42-Degrees!") == ["it", "s", "42", "degrees"]


class TestTopK:
    def test_fewer_candidates_than_k(self):
        snippets = [make_snippet(f"s{i}", f"text {i} frog") for i in range(3)]
        out = top_k(LexicalScorer(), make_query("frog"), snippets, k=10)
        assert len(out) == 3

    def test_tie_broken_by_id(self):
        snippets = [make_snippet("s-b", "same text"), make_snippet("s-a", "same text")]
        out = top_k(LexicalScorer(), make_query("same text"), snippets, k=2)
        assert [r.snippet_id for r in out] == ["s-a", "s-b"]

    def test_matches_brute_force_sort_on_fixture(self):
        rng = random.Random(7)
        vocab = ["frog", "pond", "tax", "moon", "cycle", "life", "rain", "blue", "sky", "stone"]
        snippets = [
            make_snippet(f"s{i:02d}", " ".join(rng.choices(vocab, k=rng.randint(3, 12))))
            for i in range(50)
        ]
        scorer = LexicalScorer()
        query = make_query("frog life cycle")
        expected = sorted(
            ((s.id, scorer.score(query.text, s.text)) for s in snippets),
            key=lambda pair: (-pair[1], pair[0]),
        )[:10]
        got = [(r.snippet_id, r.score) for r in top_k(scorer, query, snippets, k=10)]
        assert got == expected

    def test_prefix_property(self):
        rng = random.Random(11)
        snippets = [make_snippet(f"s{i:02d}", " ".join(rng.choices(["a", "b", "c", "d"], k=5)))
                    for i in range(20)]
        query = make_query("a b")
        scorer = LexicalScorer()
        full = top_k(scorer, query, snippets, k=len(snippets))
        for k in range(1, len(snippets) + 1):
            assert [r.snippet_id for r in top_k(scorer, query, snippets, k=k)] == \
                [r.snippet_id for r in full[:k]]

    def test_adding_snippet_does_not_change_other_scores(self):
        scorer = LexicalScorer()  # IDF off: pairwise scores are set-independent
        query = make_query("frog life cycle")
        base = [make_snippet("s1", "frog pond"), make_snippet("s2", "life of a frog")]
        before = {r.snippet_id: r.score for r in top_k(scorer, query, base, k=5)}
        extended = base + [make_snippet("s3", "frog frog frog life cycle")]
        after = {r.snippet_id: r.score for r in top_k(scorer, query, extended, k=5)}
        for sid, value in before.items():
            assert after[sid] == value

    def test_idf_mode_ranks_rare_terms_higher(self):
        scorer = LexicalScorer(use_idf=True)
        query = make_query("frog quantum")
        snippets = [make_snippet("s1", "frog frog common words"),
                    make_snippet("s2", "quantum appears once here"),
                    make_snippet("s3", "frog again with more frog")]
        out = top_k(scorer, query, snippets, k=3)
        assert out[0].snippet_id == "s2"  # rare token dominates when idf is on

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            top_k(LexicalScorer(), make_query("x"), [], k=0)


class TestEmbeddingScorer:
    def _transport(self, handler):
        return httpx.MockTransport(handler)

    def test_scores_returned_verbatim(self):
        def handler(request):
            payload = json.loads(request.content)
            return httpx.Response(200, json={"scores": [0.25 * (i + 1) for i in range(len(payload["passages"]))]})

        scorer = EmbeddingScorer("http://scorer.test/score", transport=self._transport(handler))
        assert scorer.score_many("q", ["a", "b"]) == [0.25, 0.5]
        assert score(scorer, "q", "a") == 0.25

    def test_retries_then_unavailable(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(503)

        scorer = EmbeddingScorer("http://scorer.test/score", transport=self._transport(handler),
                                 backoff_s=0.0)
        with pytest.raises(ScorerUnavailable):
            scorer.score_many("q", ["a"])
        assert calls["n"] == 3

    def test_recovers_after_transient_failure(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] == 1:
                return httpx.Response(500)
            return httpx.Response(200, json={"scores": [0.9]})

        scorer = EmbeddingScorer("http://scorer.test/score", transport=self._transport(handler),
                                 backoff_s=0.0)
        assert scorer.score_many("q", ["a"]) == [0.9]

    def test_malformed_scores_rejected(self):
        def handler(request):
            return httpx.Response(200, json={"scores": [float("nan")]})

        scorer = EmbeddingScorer("http://scorer.test/score", transport=self._transport(handler),
                                 backoff_s=0.0)
        with pytest.raises(ScorerUnavailable):
            scorer.score_many("q", ["a"])


class TestRankingIO:
    def test_roundtrip(self, tmp_path):
        snippets = [make_snippet(f"s{i}", f"frog {i}") for i in range(4)]
        rankings = {"q1": top_k(LexicalScorer(), make_query("frog"), snippets, k=3)}
        path = tmp_path / "r.jsonl"
        write_rankings(path, rankings)
        loaded = read_rankings(path)
        assert [(r.snippet_id, r.score) for r in loaded["q1"]] == \
            [(r.snippet_id, r.score) for r in rankings["q1"]]
