from __future__ import annotations

import math

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vishbench.corpus import Label, Transcript
from vishbench.errors import AlignmentError, ProviderError, UndefinedScoreError
from vishbench.semsim import (
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    StaticEmbeddingProvider,
    bertscore,
    f1_histogram,
    score_corpus,
)

tokens_st = st.lists(st.sampled_from(list("abcdefghij")), min_size=1, max_size=6)


class TableProvider:
    thread_safe = True

    def __init__(self, table):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.dim = len(next(iter(self.table.values())))

    def embed(self, tokens):
        return np.vstack([self.table[t] for t in tokens])


def brute_force(ref, cand, provider):
    """Precision/recall by explicit double loops over cosine similarities."""
    def cos(u, v):
        return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    R, C = provider.embed(ref), provider.embed(cand)
    p = sum(max(cos(c, r) for r in R) for c in C) / len(C)
    r = sum(max(cos(r, c) for c in C) for r in R) / len(R)
    return p, r


class TestBertScore:
    def test_hand_example(self):
        h = math.sqrt(0.5)
        prov = TableProvider({"a": (1, 0), "b": (0, 1), "c": (h, h)})
        s = bertscore(["a", "b"], ["a", "c"], prov)
        assert s.precision == pytest.approx((1 + h) / 2)
        assert s.recall == pytest.approx((1 + h) / 2)
        assert s.f1 == pytest.approx(0.8536, abs=1e-4)

    @given(tokens_st)
    def test_identity_is_one(self, toks):
        s = bertscore(toks, toks, HashEmbeddingProvider(16, 1))
        assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)

    @given(tokens_st, tokens_st)
    def test_duality(self, a, b):
        prov = HashEmbeddingProvider(8, 3)
        assert bertscore(a, b, prov).precision == pytest.approx(bertscore(b, a, prov).recall, abs=1e-12)

    @given(tokens_st, tokens_st, st.floats(0.1, 100))
    def test_scale_invariance(self, a, b, c):
        base = HashEmbeddingProvider(8, 5)
        scaled = TableProvider({t: c * base.embed([t])[0] for t in "abcdefghij"})
        x, y = bertscore(a, b, base), bertscore(a, b, scaled)
        assert x.f1 == pytest.approx(y.f1, abs=1e-12)

    @given(tokens_st, tokens_st, st.randoms())
    def test_order_invariance(self, a, b, rnd):
        prov = HashEmbeddingProvider(8, 7)
        a2, b2 = a[:], b[:]
        rnd.shuffle(a2)
        rnd.shuffle(b2)
        assert bertscore(a, b, prov).f1 == pytest.approx(bertscore(a2, b2, prov).f1, abs=1e-12)

    @given(tokens_st, tokens_st)
    def test_matches_brute_force(self, a, b):
        prov = HashEmbeddingProvider(6, 11)
        s = bertscore(a, b, prov)
        p, r = brute_force(a, b, prov)
        assert s.precision == pytest.approx(p, abs=1e-12) and s.recall == pytest.approx(r, abs=1e-12)

    def test_nonnegative_range(self):
        s = bertscore(list("abc"), list("xyz"), HashEmbeddingProvider(8, 0, nonnegative=True))
        assert 0 <= s.f1 <= 1

    def test_empty(self):
        with pytest.raises(UndefinedScoreError):
            bertscore([], ["a"], HashEmbeddingProvider())

    def test_zero_norm(self):
        with pytest.raises(ProviderError):
            bertscore(["a"], ["z"], TableProvider({"a": (1, 0), "z": (0, 0)}))

    def test_dimension_mismatch(self):
        class Bad:
            thread_safe = True
            dim = 2

            def embed(self, tokens):
                return np.ones((len(tokens), 2 if tokens[0] == "a" else 3))
        with pytest.raises(ProviderError):
            bertscore(["a"], ["b"], Bad())


class TestProviders:
    def test_static_file_and_oov(self, tmp_path):
        p = tmp_path / "emb.txt"
        p.write_text("dim 3\n은행\t1 0 0\nb\t0 1 0\n", encoding="utf-8")
        prov = StaticEmbeddingProvider.from_file(p)
        E = prov.embed(["은행", "b", "zz"])
        assert E.shape == (3, 3) and E[0].tolist() == [1, 0, 0]
        assert prov.oov_tokens == {"zz"}
        assert np.array_equal(prov.embed(["zz"]), prov.embed(["zz"]))

    def test_static_bad_row(self, tmp_path):
        p = tmp_path / "emb.txt"
        p.write_text("dim 3\na\t1 0\n", encoding="utf-8")
        with pytest.raises(ProviderError):
            StaticEmbeddingProvider.from_file(p)

    def test_http(self):
        def handler(req):
            import json
            toks = json.loads(req.content)["input"]
            return httpx.Response(200, json={"data": [{"embedding": [len(t), 1.0]} for t in toks]})
        prov = HttpEmbeddingProvider("http://emb.test/v1", transport=httpx.MockTransport(handler))
        assert prov.embed(["ab", "c"]).tolist() == [[2, 1], [1, 1]]

    def test_http_error(self):
        prov = HttpEmbeddingProvider("http://emb.test", transport=httpx.MockTransport(lambda r: httpx.Response(500)))
        with pytest.raises(ProviderError):
            prov.embed(["a"])


class TestCorpus:
    def _pair(self, i, a, b):
        return (Transcript(str(i), a, Label.VISHING), Transcript(str(i), b, Label.VISHING, attacker_id="x"))

    def test_identical_pairs_top_bin(self):
        pairs = [self._pair(i, "a b c", "a b c") for i in range(5)]
        cs = score_corpus(pairs, HashEmbeddingProvider())
        assert cs.histogram.counts[-1] == 5 and sum(cs.histogram.counts) == 5

    def test_empty(self):
        cs = score_corpus([], HashEmbeddingProvider())
        assert cs.scores == [] and sum(cs.histogram.counts) == 0

    def test_matches_individual_calls(self):
        rng = np.random.default_rng(0)
        words = list("abcdefgh")
        pairs = [self._pair(i, " ".join(rng.choice(words, 5)), " ".join(rng.choice(words, 4))) for i in range(5)]
        prov = HashEmbeddingProvider(16, 2)
        cs = score_corpus(pairs, prov, workers=3)
        for (o, a), s in zip(pairs, cs.scores):
            assert s == bertscore(o.text.split(), a.text.split(), prov)
        assert cs.meta == {"idf_weighting": False, "baseline_rescaling": False}

    def test_alignment(self):
        o = Transcript("1", "a", Label.VISHING)
        a = Transcript("2", "a", Label.VISHING)
        with pytest.raises(AlignmentError):
            score_corpus([(o, a)], HashEmbeddingProvider())

    def test_histogram_bins(self):
        h = f1_histogram([0.0, 0.049, 0.05, 0.999, 1.0, -0.2], 0.05)
        assert len(h.counts) == 20 and h.counts[0] == 2 and h.counts[1] == 1 and h.counts[-1] == 2
        assert h.below_range == 1
