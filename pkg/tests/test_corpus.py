import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shdp.corpus import (
    Corpus,
    EncodedDocument,
    RawDocument,
    Vocabulary,
    encode,
    kfold_split,
    load_jsonl,
    log_transform_responses,
    tfidf_prune,
    tfidf_scores,
)
from shdp.errors import ValidationError


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")


class TestLoadJsonl:
    def test_basic_fields(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_jsonl(
            p,
            [
                {"id": "d1", "tokens": ["up", "up", "down"], "response": 1.0},
                {"id": "d2", "tokens": ["flat"]},
                {"id": "d3", "tokens": ["x"], "response": None},
            ],
        )
        docs = load_jsonl(p)
        assert docs[0] == RawDocument("d1", ("up", "up", "down"), 1.0)
        assert docs[1].response is None
        assert docs[2].response is None
        assert [d.id for d in docs] == ["d1", "d2", "d3"]

    def test_duplicate_id_rejected(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_jsonl(p, [{"id": "d1", "tokens": ["a"]}, {"id": "d1", "tokens": ["b"]}])
        with pytest.raises(ValidationError, match="duplicate"):
            load_jsonl(p)

    def test_malformed_line_names_line_number(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"id": "d1", "tokens": ["a"]}\n{nonsense\n', encoding="utf-8")
        with pytest.raises(ValidationError, match="line 2"):
            load_jsonl(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="not found"):
            load_jsonl(tmp_path / "nope.jsonl")

    def test_bad_types_rejected(self, tmp_path):
        p = tmp_path / "c.jsonl"
        write_jsonl(p, [{"id": "d1", "tokens": [1, 2]}])
        with pytest.raises(ValidationError, match="tokens"):
            load_jsonl(p)


class TestTfidf:
    def test_single_term_score(self):
        # tf=2 in one of 10 docs, term in 5 docs total
        docs = [RawDocument("d0", ("w", "w"))]
        docs += [RawDocument(f"d{i}", ("w",)) for i in range(1, 5)]
        docs += [RawDocument(f"d{i}", ("z",)) for i in range(5, 10)]
        scores = tfidf_scores(docs)
        # total tf of w is 6 across 5 docs: 6 * ln(10/5)
        assert scores["w"] == pytest.approx(6 * math.log(2), abs=1e-12)
        per_doc = 2 * math.log(10 / 5)
        assert per_doc == pytest.approx(1.3863, abs=5e-5)

    def test_everywhere_term_scores_zero(self):
        docs = [RawDocument(f"d{i}", ("w", "u" + str(i))) for i in range(4)]
        assert tfidf_scores(docs)["w"] == 0.0

    def test_hand_enumerated_ranking(self):
        docs = [RawDocument("d1", ("a", "a", "b")), RawDocument("d2", ("b", "c"))]
        scores = tfidf_scores(docs)
        assert scores["a"] == pytest.approx(2 * math.log(2))
        assert scores["b"] == 0.0
        assert scores["c"] == pytest.approx(math.log(2))
        vocab = tfidf_prune(docs, keep=2, max_doc_frac=1.0, min_count=0)
        assert set(vocab.terms) == {"a", "c"}

    def test_doc_frequency_cap(self):
        docs = [RawDocument(f"d{i}", ("common", f"u{i}")) for i in range(8)]
        vocab = tfidf_prune(docs, keep=100, max_doc_frac=0.25, min_count=0)
        assert "common" not in vocab.terms
        assert len(vocab.terms) == 8

    def test_min_count_filter(self):
        docs = [
            RawDocument("d1", ("rare",) + ("often",) * 5),
            RawDocument("d2", ("often",) * 5 + ("x",) * 5),
        ]
        vocab = tfidf_prune(docs, keep=100, max_doc_frac=1.0, min_count=5)
        assert "rare" not in vocab.terms
        assert "x" in vocab.terms

    def test_all_filtered_is_error(self):
        docs = [RawDocument("d1", ("a",)), RawDocument("d2", ("a",))]
        with pytest.raises(ValidationError, match="empty"):
            tfidf_prune(docs, keep=10, max_doc_frac=0.25, min_count=0)

    def test_lexicographic_tiebreak(self):
        # b and a tie on score; a wins the single slot
        docs = [RawDocument("d1", ("b", "a")), RawDocument("d2", ("c",))]
        vocab = tfidf_prune(docs, keep=1, max_doc_frac=1.0, min_count=0)
        assert vocab.terms == ("a",)


class TestEncode:
    def test_oov_tokens_dropped_order_kept(self):
        vocab = Vocabulary.from_terms(["a", "b"])
        corpus, dropped = encode([RawDocument("d1", ("a", "z", "a"))], vocab)
        assert list(corpus.documents[0].token_ids) == [0, 0]
        assert dropped == []
        corpus, _ = encode([RawDocument("d1", ("b", "a"))], vocab)
        assert list(corpus.documents[0].token_ids) == [1, 0]

    def test_empty_document_excluded_and_reported(self):
        vocab = Vocabulary.from_terms(["a"])
        corpus, dropped = encode(
            [RawDocument("d1", ("z",)), RawDocument("d2", ("a",))], vocab
        )
        assert dropped == ["d1"]
        assert [d.id for d in corpus.documents] == ["d2"]

    def test_responses_carried_through(self):
        vocab = Vocabulary.from_terms(["a"])
        corpus, _ = encode([RawDocument("d1", ("a",), 2.5)], vocab)
        assert corpus.documents[0].response == 2.5

    @given(
        st.lists(
            st.lists(st.sampled_from("abcz"), min_size=1, max_size=8),
            min_size=1,
            max_size=6,
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_equals_original_minus_oov(self, token_lists):
        vocab = Vocabulary.from_terms(["a", "b", "c"])
        docs = [RawDocument(f"d{i}", tuple(toks)) for i, toks in enumerate(token_lists)]
        corpus, dropped = encode(docs, vocab)
        by_id = {d.id: d for d in corpus.documents}
        for doc in docs:
            expected = [t for t in doc.tokens if t in vocab.index]
            if not expected:
                assert doc.id in dropped
                continue
            decoded = [vocab.terms[t] for t in by_id[doc.id].token_ids]
            assert decoded == expected


class TestLogTransform:
    def make(self, responses):
        vocab = Vocabulary.from_terms(["a"])
        docs = tuple(
            EncodedDocument(f"d{i}", np.array([0]), r) for i, r in enumerate(responses)
        )
        return Corpus(vocab, docs)

    def test_values(self):
        out = log_transform_responses(self.make([1.0]), offset=0.0)
        assert out.documents[0].response == pytest.approx(0.0)
        out = log_transform_responses(self.make([math.e - 1.0]), offset=1.0)
        assert out.documents[0].response == pytest.approx(1.0)

    def test_unlabelled_untouched(self):
        out = log_transform_responses(self.make([None, 3.0]), offset=1.0)
        assert out.documents[0].response is None
        assert out.documents[1].response == pytest.approx(math.log(4.0))

    def test_nonpositive_argument_names_document(self):
        with pytest.raises(ValidationError, match="d0"):
            log_transform_responses(self.make([0.0]), offset=0.0)


class TestKfold:
    def make(self, n_labelled, n_unlabelled=0):
        vocab = Vocabulary.from_terms(["a"])
        docs = [
            EncodedDocument(f"l{i}", np.array([0]), float(i)) for i in range(n_labelled)
        ]
        docs += [EncodedDocument(f"u{i}", np.array([0]), None) for i in range(n_unlabelled)]
        return Corpus(vocab, tuple(docs))

    def test_partition_sizes(self):
        corpus = self.make(10)
        folds = kfold_split(corpus, 5, seed=0)
        assert len(folds) == 5
        test_ids = [frozenset(d.id for d in test.documents) for _, test in folds]
        assert all(len(ids) == 2 for ids in test_ids)
        assert frozenset().union(*test_ids) == {f"l{i}" for i in range(10)}
        # pairwise disjoint
        assert sum(len(ids) for ids in test_ids) == 10

    def test_deterministic(self):
        corpus = self.make(11)
        a = kfold_split(corpus, 3, seed=42)
        b = kfold_split(corpus, 3, seed=42)
        for (_, ta), (_, tb) in zip(a, b):
            assert [d.id for d in ta.documents] == [d.id for d in tb.documents]

    def test_unlabelled_in_every_train_set(self):
        corpus = self.make(9, n_unlabelled=1)
        folds = kfold_split(corpus, 3, seed=1)
        for train, test in folds:
            assert "u0" in [d.id for d in train.documents]
            assert all(d.labelled for d in test.documents)
            assert len(test.documents) == 3

    def test_too_few_documents(self):
        with pytest.raises(ValidationError):
            kfold_split(self.make(2), 3, seed=0)
