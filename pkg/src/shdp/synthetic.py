"""Synthetic grouped-data generators for experiments and tests.

Documents are drawn topic-first: each document mixes a fixed set of
planted topic-word distributions, and its response is a GLM draw on the
empirical topic proportions actually sampled. Two planted topics may
share one word distribution, in which case only the response carries
information to tell them apart.
"""

from __future__ import annotations

import numpy as np

from .corpus import Corpus, EncodedDocument, Vocabulary
from .errors import ValidationError
from .glm import BINOMIAL, GAUSSIAN, sigmoid

__all__ = ["block_topics", "planted_corpus"]


def block_topics(
    n_topics: int, vocab_size: int, block_of=None, smoothing: float = 0.0
) -> np.ndarray:
    """Topic-word distributions concentrated on contiguous word blocks.

    ``block_of[k]`` picks the block for topic k; topics sharing a block
    are word-identical. With ``smoothing`` > 0 a little mass is spread
    over the whole vocabulary.
    """
    if block_of is None:
        block_of = list(range(n_topics))
    if len(block_of) != n_topics:
        raise ValidationError("block_of must assign a block to every topic")
    n_blocks = max(block_of) + 1
    if vocab_size < n_blocks:
        raise ValidationError("vocabulary too small for the requested blocks")
    edges = np.linspace(0, vocab_size, n_blocks + 1).astype(int)
    topics = np.full((n_topics, vocab_size), smoothing, dtype=np.float64)
    for k, blk in enumerate(block_of):
        topics[k, edges[blk] : edges[blk + 1]] += 1.0
    return topics / topics.sum(axis=1, keepdims=True)


def planted_corpus(
    n_docs: int,
    topics: np.ndarray,
    coefficients: np.ndarray,
    doc_len: int = 40,
    noise_sd: float = 0.25,
    family: str = GAUSSIAN,
    mix_conc: float = 0.5,
    labelled_frac: float = 1.0,
    seed: int = 0,
    id_prefix: str = "doc",
) -> Corpus:
    """Draw a corpus from planted topics with GLM responses.

    Per document: a Dirichlet(mix_conc) mixture over the planted topics,
    token-level topic draws, words from the drawn topics, and a response
    from the document's empirical topic proportions. A fraction of
    documents can be left unlabelled for semi-supervised runs.
    """
    topics = np.asarray(topics, dtype=np.float64)
    coefficients = np.asarray(coefficients, dtype=np.float64)
    n_topics, vocab_size = topics.shape
    if len(coefficients) != n_topics:
        raise ValidationError("one coefficient per planted topic required")
    if family not in (GAUSSIAN, BINOMIAL):
        raise ValidationError(f"unknown family {family!r}")
    rng = np.random.default_rng(seed)
    cum_topics = topics.cumsum(axis=1)
    docs = []
    for i in range(n_docs):
        theta = rng.dirichlet(np.full(n_topics, mix_conc))
        z = rng.choice(n_topics, size=doc_len, p=theta)
        words = np.empty(doc_len, dtype=np.int64)
        for j, k in enumerate(z):
            words[j] = np.searchsorted(cum_topics[k], rng.random(), side="right")
        zbar = np.bincount(z, minlength=n_topics) / doc_len
        rho = float(coefficients @ zbar)
        if family == GAUSSIAN:
            y = rho + noise_sd * rng.standard_normal()
        else:
            y = float(rng.random() < sigmoid(rho))
        labelled = rng.random() < labelled_frac
        docs.append(
            EncodedDocument(
                id=f"{id_prefix}{i:05d}",
                token_ids=words,
                response=y if labelled else None,
            )
        )
    vocab = Vocabulary.from_terms([f"w{v:04d}" for v in range(vocab_size)])
    return Corpus(vocab, tuple(docs))
