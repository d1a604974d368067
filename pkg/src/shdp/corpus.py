"""Corpus loading, vocabulary pruning, encoding, and fold splitting.

Documents arrive as JSONL (one object per line with ``id``, ``tokens``
and an optional numeric ``response``), get pruned to a TF-IDF-ranked
vocabulary, and are encoded into immutable integer-id documents. All
operations are pure: identical inputs (including seeds) give identical
outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

__all__ = [
    "RawDocument",
    "Vocabulary",
    "EncodedDocument",
    "Corpus",
    "load_jsonl",
    "tfidf_scores",
    "tfidf_prune",
    "encode",
    "log_transform_responses",
    "kfold_split",
]


@dataclass(frozen=True)
class RawDocument:
    """A tokenized document with an optional real-valued response."""

    id: str
    tokens: tuple[str, ...]
    response: float | None = None

    @property
    def labelled(self) -> bool:
        return self.response is not None


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between term strings and dense integer ids."""

    terms: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    @classmethod
    def from_terms(cls, terms) -> "Vocabulary":
        terms = tuple(terms)
        if not terms:
            raise ValidationError("vocabulary must contain at least one term")
        index = {t: i for i, t in enumerate(terms)}
        if len(index) != len(terms):
            raise ValidationError("vocabulary terms must be distinct")
        return cls(terms=terms, index=index)

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index


@dataclass(frozen=True)
class EncodedDocument:
    """A document whose tokens have been mapped to vocabulary ids."""

    id: str
    token_ids: np.ndarray  # int64, order-preserving
    response: float | None = None

    @property
    def labelled(self) -> bool:
        return self.response is not None

    def __len__(self) -> int:
        return len(self.token_ids)


@dataclass(frozen=True)
class Corpus:
    """Immutable encoded corpus sharing one vocabulary."""

    vocabulary: Vocabulary
    documents: tuple[EncodedDocument, ...]

    def __post_init__(self):
        ids = [d.id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise ValidationError("document ids must be unique")
        V = len(self.vocabulary)
        for d in self.documents:
            if len(d.token_ids) == 0:
                raise ValidationError(f"document {d.id!r} has no tokens")
            if d.token_ids.min(initial=0) < 0 or d.token_ids.max(initial=0) >= V:
                raise ValidationError(f"document {d.id!r} has out-of-range token ids")

    @property
    def D(self) -> int:
        return len(self.documents)

    @property
    def V(self) -> int:
        return len(self.vocabulary)

    def labelled_indices(self) -> list[int]:
        return [i for i, d in enumerate(self.documents) if d.labelled]

    def responses(self) -> np.ndarray:
        """Responses as float64 with NaN marking unlabelled documents."""
        return np.array(
            [math.nan if d.response is None else d.response for d in self.documents],
            dtype=np.float64,
        )

    def pack(self) -> tuple[np.ndarray, np.ndarray]:
        """Flatten token ids into one array plus document offsets."""
        offsets = np.zeros(self.D + 1, dtype=np.int64)
        for i, d in enumerate(self.documents):
            offsets[i + 1] = offsets[i] + len(d.token_ids)
        tokens = np.concatenate([d.token_ids for d in self.documents]) if self.D else np.zeros(0, np.int64)
        return tokens.astype(np.int64), offsets

    def subset(self, indices) -> "Corpus":
        return Corpus(self.vocabulary, tuple(self.documents[i] for i in indices))

    def strip_responses(self) -> "Corpus":
        docs = tuple(
            EncodedDocument(d.id, d.token_ids, None) for d in self.documents
        )
        return Corpus(self.vocabulary, docs)


def load_jsonl(path) -> list[RawDocument]:
    """Read documents from a JSONL file.

    Each line must be an object with string ``id``, array-of-strings
    ``tokens``, and optionally a numeric or null ``response``.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"corpus file not found: {path}")
    docs: list[RawDocument] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ValidationError(f"line {lineno}: expected a JSON object")
            doc_id = obj.get("id")
            tokens = obj.get("tokens")
            if not isinstance(doc_id, str):
                raise ValidationError(f"line {lineno}: 'id' must be a string")
            if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
                raise ValidationError(f"line {lineno}: 'tokens' must be an array of strings")
            response = obj.get("response")
            if response is not None and not isinstance(response, (int, float)):
                raise ValidationError(f"line {lineno}: 'response' must be a number or null")
            if doc_id in seen:
                raise ValidationError(f"line {lineno}: duplicate document id {doc_id!r}")
            seen.add(doc_id)
            docs.append(
                RawDocument(
                    id=doc_id,
                    tokens=tuple(tokens),
                    response=None if response is None else float(response),
                )
            )
    return docs


def tfidf_scores(docs: list[RawDocument]) -> dict[str, float]:
    """Total TF-IDF per term: sum over documents of tf(w) * ln(D / n_w)."""
    if not docs:
        raise ValidationError("cannot score an empty document list")
    D = len(docs)
    doc_freq: dict[str, int] = {}
    total_tf: dict[str, int] = {}
    for doc in docs:
        counts: dict[str, int] = {}
        for tok in doc.tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            doc_freq[term] = doc_freq.get(term, 0) + 1
            total_tf[term] = total_tf.get(term, 0) + tf
    # tf is additive across documents and the idf factor is shared, so the
    # per-term total collapses to total_tf * ln(D / n_w)
    return {
        term: total_tf[term] * math.log(D / doc_freq[term]) for term in doc_freq
    }


def tfidf_prune(
    docs: list[RawDocument],
    keep: int,
    max_doc_frac: float = 0.25,
    min_count: int = 5,
) -> Vocabulary:
    """Select a vocabulary of the `keep` highest total-TF-IDF terms.

    Terms occurring in more than ``max_doc_frac`` of the documents or
    fewer than ``min_count`` times in total are removed before ranking.
    Ties in score break lexicographically so the result is deterministic.
    """
    if keep < 1:
        raise ValidationError("keep must be >= 1")
    if not docs:
        raise ValidationError("cannot prune an empty document list")
    if not (0.0 < max_doc_frac <= 1.0):
        raise ValidationError("max_doc_frac must be in (0, 1]")
    D = len(docs)
    doc_freq: dict[str, int] = {}
    total_tf: dict[str, int] = {}
    for doc in docs:
        counts: dict[str, int] = {}
        for tok in doc.tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            doc_freq[term] = doc_freq.get(term, 0) + 1
            total_tf[term] = total_tf.get(term, 0) + tf
    candidates = [
        term
        for term in doc_freq
        if doc_freq[term] <= max_doc_frac * D and total_tf[term] >= min_count
    ]
    if not candidates:
        raise ValidationError("all terms were filtered out; vocabulary would be empty")
    score = {t: total_tf[t] * math.log(D / doc_freq[t]) for t in candidates}
    ranked = sorted(candidates, key=lambda t: (-score[t], t))
    return Vocabulary.from_terms(ranked[:keep])


def encode(docs: list[RawDocument], vocab: Vocabulary) -> tuple[Corpus, list[str]]:
    """Map documents onto vocabulary ids, dropping out-of-vocabulary tokens.

    Documents left with zero tokens are excluded; their ids are returned
    alongside the corpus so callers can report them.
    """
    if len(vocab) == 0:
        raise ValidationError("vocabulary must be non-empty")
    encoded: list[EncodedDocument] = []
    dropped: list[str] = []
    for doc in docs:
        ids = [vocab.index[t] for t in doc.tokens if t in vocab.index]
        if not ids:
            dropped.append(doc.id)
            continue
        encoded.append(
            EncodedDocument(doc.id, np.array(ids, dtype=np.int64), doc.response)
        )
    return Corpus(vocab, tuple(encoded)), dropped


def log_transform_responses(corpus: Corpus, offset: float = 1.0) -> Corpus:
    """Replace each labelled response y with ln(y + offset)."""
    if offset < 0:
        raise ValidationError("offset must be nonnegative")
    docs = []
    for d in corpus.documents:
        if d.response is None:
            docs.append(d)
            continue
        arg = d.response + offset
        if arg <= 0:
            raise ValidationError(
                f"document {d.id!r}: response {d.response} + offset {offset} is not positive"
            )
        docs.append(EncodedDocument(d.id, d.token_ids, math.log(arg)))
    return Corpus(corpus.vocabulary, tuple(docs))


def kfold_split(corpus: Corpus, k: int, seed: int) -> list[tuple[Corpus, Corpus]]:
    """Partition labelled documents into k test folds.

    Unlabelled documents stay in every training corpus. The shuffle is
    deterministic in the seed and fold sizes differ by at most one.
    """
    if k < 2:
        raise ValidationError("k must be >= 2")
    labelled = corpus.labelled_indices()
    if corpus.D < k:
        raise ValidationError(f"need at least k={k} documents, got {corpus.D}")
    if len(labelled) < k:
        raise ValidationError(
            f"need at least k={k} labelled documents, got {len(labelled)}"
        )
    order = np.array(labelled, dtype=np.int64)
    np.random.default_rng(seed).shuffle(order)
    folds = np.array_split(order, k)
    out = []
    for fold in folds:
        test_set = set(int(i) for i in fold)
        train_idx = [i for i in range(corpus.D) if i not in test_set]
        test_idx = sorted(test_set)
        out.append((corpus.subset(train_idx), corpus.subset(test_idx)))
    return out
