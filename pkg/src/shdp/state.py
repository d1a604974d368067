"""Collapsed sampler state: allocations, count tables, and stick weights.

The state keeps dense integer count arrays indexed ``[topic][term]``
with a parallel topic-total array. Topic ids are dense; empty topics
are removed by explicit compaction which returns a relabelling map so
callers can keep per-topic coefficient vectors aligned. Count arrays
are over-allocated (``capacity`` columns) so the token-level kernel can
instantiate topics without reallocating; columns at or beyond ``K`` are
always zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import ValidationError

__all__ = ["ConcentrationPrior", "HdpState"]


@dataclass(frozen=True)
class ConcentrationPrior:
    """Gamma(shape, rate) prior for a DP concentration parameter."""

    shape: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValidationError("concentration prior shape and rate must be > 0")


def stick_fraction(rng: np.random.Generator, gamma: float) -> float:
    """Draw b ~ Beta(1, gamma) via inverse-CDF from a single uniform.

    Shared by the Python ops and the jitted kernel so both consume the
    random stream identically.
    """
    u = rng.random()
    return 1.0 - u ** (1.0 / gamma)


class HdpState:
    """Mutable collapsed state for one chain.

    Owns the (packed) token array and per-token allocations ``z`` along
    with all sufficient statistics. An allocation of -1 marks a token
    not yet assigned (used when seeding test documents).
    """

    def __init__(self, tokens, offsets, V, alpha, gamma, alpha_w, capacity=16):
        self.tokens = np.asarray(tokens, dtype=np.int64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.V = int(V)
        self.D = len(self.offsets) - 1
        if alpha <= 0 or gamma <= 0 or alpha_w <= 0:
            raise ValidationError("alpha, gamma and alpha_w must be > 0")
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.alpha_w = float(alpha_w)
        self.K = 0
        self.beta_new = 1.0
        self.z = np.full(len(self.tokens), -1, dtype=np.int64)
        cap = max(int(capacity), 1)
        self._n_dk = np.zeros((self.D, cap), dtype=np.int64)
        self._c_kw = np.zeros((cap, self.V), dtype=np.int64)
        self._c_k = np.zeros(cap, dtype=np.int64)
        self._m_dk = np.zeros((self.D, cap), dtype=np.int64)
        self._beta = np.zeros(cap, dtype=np.float64)

    @classmethod
    def from_corpus(cls, corpus: Corpus, alpha, gamma, alpha_w, capacity=16) -> "HdpState":
        tokens, offsets = corpus.pack()
        return cls(tokens, offsets, corpus.V, alpha, gamma, alpha_w, capacity)

    @classmethod
    def for_prediction(cls, trained: "HdpState", test_corpus: Corpus) -> "HdpState":
        """Fresh state over test documents with frozen training counts.

        Topic-word counts start from a copy of the trained counts, so the
        collapsed word predictive sees the training corpus as a fixed
        background; test allocations only add on top of the copy.
        """
        tokens, offsets = test_corpus.pack()
        st = cls(
            tokens,
            offsets,
            trained.V,
            trained.alpha,
            trained.gamma,
            trained.alpha_w,
            capacity=trained.capacity,
        )
        st.K = trained.K
        st.beta_new = trained.beta_new
        st._beta[: trained.capacity] = trained._beta
        st._c_kw[: trained.capacity] = trained._c_kw
        st._c_k[: trained.capacity] = trained._c_k
        return st

    # -- views -------------------------------------------------------------

    @property
    def capacity(self) -> int:
        return self._beta.shape[0]

    @property
    def n_dk(self) -> np.ndarray:
        return self._n_dk[:, : self.K]

    @property
    def c_kw(self) -> np.ndarray:
        return self._c_kw[: self.K]

    @property
    def c_k(self) -> np.ndarray:
        return self._c_k[: self.K]

    @property
    def m_dk(self) -> np.ndarray:
        return self._m_dk[:, : self.K]

    @property
    def m_k(self) -> np.ndarray:
        return self._m_dk[:, : self.K].sum(axis=0)

    @property
    def beta(self) -> np.ndarray:
        return self._beta[: self.K]

    def doc_length(self, d: int) -> int:
        return int(self.offsets[d + 1] - self.offsets[d])

    def doc_lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def doc_slice(self, d: int) -> slice:
        return slice(int(self.offsets[d]), int(self.offsets[d + 1]))

    def topic_shares(self, d: int) -> np.ndarray:
        """Empirical topic distribution n_dk / N_d for document d."""
        n = self.doc_length(d)
        return self._n_dk[d, : self.K] / float(n)

    # -- capacity and counts ------------------------------------------------

    def ensure_capacity(self, need: int) -> None:
        cap = self.capacity
        if need <= cap:
            return
        new_cap = cap
        while new_cap < need:
            new_cap *= 2
        grow = new_cap - cap
        self._n_dk = np.hstack([self._n_dk, np.zeros((self.D, grow), np.int64)])
        self._c_kw = np.vstack([self._c_kw, np.zeros((grow, self.V), np.int64)])
        self._c_k = np.concatenate([self._c_k, np.zeros(grow, np.int64)])
        self._m_dk = np.hstack([self._m_dk, np.zeros((self.D, grow), np.int64)])
        self._beta = np.concatenate([self._beta, np.zeros(grow, np.float64)])

    def assign_all(self, z, k_init: int) -> None:
        """Set all allocations at once and rebuild the count tables.

        ``k_init`` fixes the number of instantiated topics, which may
        exceed the largest id in ``z`` (empty topics survive until the
        next compaction).
        """
        z = np.asarray(z, dtype=np.int64)
        if z.shape != self.z.shape:
            raise ValidationError("allocation vector has wrong length")
        if len(z) and (z.min() < 0 or z.max() >= k_init):
            raise ValidationError("allocations out of range")
        self.ensure_capacity(k_init + 1)
        self.z = z.copy()
        self.K = int(k_init)
        self.rebuild_counts()

    def rebuild_counts(self) -> None:
        self._n_dk[:] = 0
        self._c_kw[:] = 0
        self._c_k[:] = 0
        for d in range(self.D):
            sl = self.doc_slice(d)
            for j in range(sl.start, sl.stop):
                k = self.z[j]
                if k < 0:
                    continue
                self._n_dk[d, k] += 1
                self._c_kw[k, self.tokens[j]] += 1
                self._c_k[k] += 1

    # -- collapsed predictives ----------------------------------------------

    def word_predictive(self, k: int, w: int) -> float:
        """Probability of term w under topic k given the other allocated words."""
        if not 0 <= k < self.K:
            raise ValidationError(f"topic {k} is not instantiated (K={self.K})")
        return (self._c_kw[k, w] + self.alpha_w) / (
            self._c_k[k] + self.V * self.alpha_w
        )

    def new_topic_predictive(self, w: int) -> float:
        """Probability of term w in an empty topic (symmetric prior marginal)."""
        return 1.0 / self.V

    # -- topic lifecycle ------------------------------------------------------

    def instantiate_topic(self, rng: np.random.Generator) -> int:
        """Create an empty topic by stick-breaking the leftover mass."""
        self.ensure_capacity(self.K + 1)
        k = self.K
        piece = stick_fraction(rng, self.gamma) * self.beta_new
        self._beta[k] = piece
        self.beta_new = self.beta_new - piece
        self.K += 1
        return k

    def compact_topics(self) -> dict[int, int]:
        """Drop topics with zero counts, returning the old-to-new id map.

        Freed stick mass goes back to ``beta_new``; allocations are
        relabelled in place.
        """
        K = self.K
        keep = [k for k in range(K) if self._c_k[k] > 0]
        if len(keep) == K:
            return {k: k for k in range(K)}
        mapping = {old: new for new, old in enumerate(keep)}
        freed = 0.0
        for k in range(K):
            if k not in mapping:
                freed += self._beta[k]
        keep_arr = np.array(keep, dtype=np.int64)
        new_K = len(keep)
        self._n_dk[:, :new_K] = self._n_dk[:, keep_arr]
        self._n_dk[:, new_K:K] = 0
        self._m_dk[:, :new_K] = self._m_dk[:, keep_arr]
        self._m_dk[:, new_K:K] = 0
        self._c_kw[:new_K] = self._c_kw[keep_arr]
        self._c_kw[new_K:K] = 0
        self._c_k[:new_K] = self._c_k[keep_arr]
        self._c_k[new_K:K] = 0
        self._beta[:new_K] = self._beta[keep_arr]
        self._beta[new_K:K] = 0.0
        self.beta_new += freed
        lut = np.full(K, -1, dtype=np.int64)
        for old, new in mapping.items():
            lut[old] = new
        assigned = self.z >= 0
        self.z[assigned] = lut[self.z[assigned]]
        self.K = new_K
        return mapping

    # -- concentration parameters ---------------------------------------------

    def resample_concentrations(
        self,
        prior_alpha: ConcentrationPrior,
        prior_gamma: ConcentrationPrior,
        rng: np.random.Generator,
    ) -> tuple[float, float]:
        """One auxiliary-variable Gibbs update for alpha and gamma.

        alpha couples to the per-document token totals and the total
        table count; gamma couples to the table total and the number of
        instantiated topics. With no data both reduce to prior draws.
        """
        lengths = self.doc_lengths()
        lengths = lengths[lengths > 0]
        m_total = int(self._m_dk.sum())

        a, b = prior_alpha.shape, prior_alpha.rate
        if len(lengths) > 0 and m_total > 0:
            w = rng.beta(self.alpha + 1.0, lengths.astype(np.float64))
            w = np.maximum(w, 1e-300)
            s = rng.random(len(lengths)) < lengths / (lengths + self.alpha)
            shape = a + m_total - s.sum()
            rate = b - np.log(w).sum()
            self.alpha = float(rng.gamma(shape, 1.0 / rate))
        else:
            self.alpha = float(rng.gamma(a, 1.0 / b))

        a, b = prior_gamma.shape, prior_gamma.rate
        if self.K > 0 and m_total > 0:
            x = max(rng.beta(self.gamma + 1.0, m_total), 1e-300)
            rate = b - math.log(x)
            odds_num = a + self.K - 1.0
            pi = odds_num / (odds_num + m_total * rate)
            if rng.random() < pi:
                self.gamma = float(rng.gamma(a + self.K, 1.0 / rate))
            else:
                self.gamma = float(rng.gamma(a + self.K - 1.0, 1.0 / rate))
        else:
            self.gamma = float(rng.gamma(a, 1.0 / b))
        return self.alpha, self.gamma

    # -- consistency ------------------------------------------------------------

    def validate(self, eta=None, check_tables: bool = True, compacted: bool = False) -> None:
        """Check every structural invariant; raise ValidationError on failure.

        Intended for tests and debug runs, not the hot path.
        """
        K, cap = self.K, self.capacity
        total = self._beta[:K].sum() + self.beta_new
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"stick weights sum to {total!r}, not 1")
        if (self._beta[:K] < 0).any() or self.beta_new < 0:
            raise ValidationError("negative stick weight")
        if self._beta[K:].any():
            raise ValidationError("nonzero beta beyond K")
        if self._n_dk[:, K:].any() or self._c_kw[K:].any() or self._c_k[K:].any():
            raise ValidationError("nonzero counts beyond K")
        if self._m_dk[:, K:].any():
            raise ValidationError("nonzero table counts beyond K")
        assigned = self.z >= 0
        if assigned.all():
            row_sums = self._n_dk[:, :K].sum(axis=1)
            if not np.array_equal(row_sums, self.doc_lengths()):
                raise ValidationError("document-topic counts do not sum to document lengths")
        n_cols = self._n_dk[:, :K].sum(axis=0)
        if not np.array_equal(n_cols, self._c_k[:K]):
            raise ValidationError("topic totals disagree with document-topic counts")
        if not np.array_equal(self._c_kw[:K].sum(axis=1), self._c_k[:K]):
            raise ValidationError("topic-term counts do not sum to topic totals")
        # recount from allocations
        recount = np.zeros(K, dtype=np.int64)
        for j in range(len(self.z)):
            if self.z[j] >= 0:
                if self.z[j] >= K:
                    raise ValidationError("allocation references a missing topic")
                recount[self.z[j]] += 1
        if not np.array_equal(recount, self._c_k[:K]):
            raise ValidationError("allocations disagree with topic totals")
        if check_tables:
            n = self._n_dk[:, :K]
            m = self._m_dk[:, :K]
            if ((n > 0) & ((m < 1) | (m > n))).any():
                raise ValidationError("table counts outside [1, n_dk]")
            if ((n == 0) & (m != 0)).any():
                raise ValidationError("nonzero table count for an empty cell")
        if compacted and (self._c_k[:K] == 0).any():
            raise ValidationError("empty topic survived compaction")
        if eta is not None and len(eta) != K:
            raise ValidationError(f"coefficient vector has length {len(eta)}, K={K}")
        if self.alpha <= 0 or self.gamma <= 0:
            raise ValidationError("concentrations must stay positive")

    def clone(self) -> "HdpState":
        st = HdpState(
            self.tokens,
            self.offsets,
            self.V,
            self.alpha,
            self.gamma,
            self.alpha_w,
            capacity=self.capacity,
        )
        st.K = self.K
        st.beta_new = self.beta_new
        st.z = self.z.copy()
        st._n_dk = self._n_dk.copy()
        st._c_kw = self._c_kw.copy()
        st._c_k = self._c_k.copy()
        st._m_dk = self._m_dk.copy()
        st._beta = self._beta.copy()
        return st
