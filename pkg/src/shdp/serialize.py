"""JSON persistence for corpora and trained model snapshots.

Everything is written as canonical JSON (sorted keys, no whitespace) so
reruns with the same seed are byte-identical and snapshots round-trip
losslessly. A model snapshot is self-contained for prediction: it
carries the vocabulary, topic-word counts, stick weights, coefficients,
and hyperparameters, but no training documents.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .corpus import Corpus, EncodedDocument, Vocabulary
from .errors import ValidationError
from .glm import ResponseModel
from .state import HdpState

__all__ = [
    "CORPUS_FORMAT_VERSION",
    "MODEL_FORMAT_VERSION",
    "canonical_json",
    "save_corpus",
    "load_corpus",
    "save_model",
    "load_model",
]

CORPUS_FORMAT_VERSION = 1
MODEL_FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return obj


def save_corpus(corpus: Corpus, path) -> None:
    docs = []
    for d in corpus.documents:
        docs.append(
            {
                "id": d.id,
                "tokens": [int(t) for t in d.token_ids],
                "response": d.response,
            }
        )
    payload = {
        "format_version": CORPUS_FORMAT_VERSION,
        "vocabulary": list(corpus.vocabulary.terms),
        "documents": docs,
    }
    Path(path).write_text(canonical_json(payload), encoding="utf-8")


def load_corpus(path) -> Corpus:
    obj = _read_json(path)
    if obj.get("format_version") != CORPUS_FORMAT_VERSION:
        raise ValidationError(
            f"{path}: unsupported corpus format version {obj.get('format_version')!r}"
        )
    vocab = Vocabulary.from_terms(obj["vocabulary"])
    docs = []
    for entry in obj["documents"]:
        docs.append(
            EncodedDocument(
                id=entry["id"],
                token_ids=np.asarray(entry["tokens"], dtype=np.int64),
                response=None if entry.get("response") is None else float(entry["response"]),
            )
        )
    return Corpus(vocab, tuple(docs))


def save_model(
    path,
    state: HdpState,
    model: ResponseModel,
    vocabulary: Vocabulary,
    seed: int,
) -> None:
    if state.V != len(vocabulary):
        raise ValidationError("state and vocabulary disagree on V")
    if len(model.eta) != state.K:
        raise ValidationError("coefficients are not aligned with the state")
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "family": model.family,
        "vocabulary": list(vocabulary.terms),
        "K": state.K,
        "beta": [float(b) for b in state.beta],
        "beta_new": float(state.beta_new),
        "c_kw": [[int(c) for c in row] for row in state.c_kw],
        "eta": [float(e) for e in model.eta],
        "delta": float(model.delta),
        "zeta": float(model.zeta),
        "alpha": float(state.alpha),
        "gamma": float(state.gamma),
        "alpha_w": float(state.alpha_w),
        "seed": int(seed),
    }
    Path(path).write_text(canonical_json(payload), encoding="utf-8")


def load_model(path) -> tuple[HdpState, ResponseModel, dict]:
    """Rebuild a prediction-ready state and response model from a snapshot.

    The returned state has no documents of its own; it exists to seed
    ``HdpState.for_prediction`` with the trained counts and weights.
    """
    obj = _read_json(path)
    if obj.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValidationError(
            f"{path}: unsupported model format version {obj.get('format_version')!r}"
        )
    vocab = Vocabulary.from_terms(obj["vocabulary"])
    K = int(obj["K"])
    c_kw = np.asarray(obj["c_kw"], dtype=np.int64)
    if c_kw.shape != (K, len(vocab)):
        raise ValidationError(f"{path}: c_kw shape does not match K and V")
    if len(obj["beta"]) != K or len(obj["eta"]) != K:
        raise ValidationError(f"{path}: beta and eta must have K entries")
    state = HdpState(
        tokens=np.zeros(0, dtype=np.int64),
        offsets=np.zeros(1, dtype=np.int64),
        V=len(vocab),
        alpha=float(obj["alpha"]),
        gamma=float(obj["gamma"]),
        alpha_w=float(obj["alpha_w"]),
        capacity=max(16, 2 * K),
    )
    state.K = K
    state.beta_new = float(obj["beta_new"])
    state._beta[:K] = np.asarray(obj["beta"], dtype=np.float64)
    state._c_kw[:K] = c_kw
    state._c_k[:K] = c_kw.sum(axis=1)
    model = ResponseModel(
        family=obj["family"],
        eta=np.asarray(obj["eta"], dtype=np.float64),
        zeta=float(obj["zeta"]),
        delta=float(obj["delta"]),
    )
    meta = {"seed": int(obj["seed"]), "vocabulary": vocab}
    return state, model, meta
