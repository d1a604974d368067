import numpy as np
import pytest

from shdp.corpus import Corpus, EncodedDocument, Vocabulary
from shdp.errors import ValidationError
from shdp.state import ConcentrationPrior, HdpState


def tiny_state(alpha=1.0, gamma=1.0, alpha_w=0.01, V=10):
    vocab = Vocabulary.from_terms([f"w{i}" for i in range(V)])
    docs = (
        EncodedDocument("d0", np.array([0, 1, 2, 0]), 1.0),
        EncodedDocument("d1", np.array([3, 3, 1]), None),
    )
    corpus = Corpus(vocab, docs)
    return HdpState.from_corpus(corpus, alpha, gamma, alpha_w)


class TestWordPredictive:
    def test_empty_topic_is_uniform(self):
        st = tiny_state()
        st.assign_all(np.zeros(7, dtype=np.int64), 2)  # topic 1 empty
        for w in range(st.V):
            assert st.word_predictive(1, w) == pytest.approx(0.01 / 0.1)

    def test_direct_formula(self):
        st = tiny_state(V=10)
        # place 7 tokens in topic 0, 3 of them word 0
        st2 = HdpState(
            tokens=np.array([0, 0, 0, 1, 1, 2, 3]),
            offsets=np.array([0, 7]),
            V=10,
            alpha=1.0,
            gamma=1.0,
            alpha_w=0.01,
        )
        st2.assign_all(np.zeros(7, dtype=np.int64), 1)
        assert st2.word_predictive(0, 0) == pytest.approx(3.01 / 7.1)
        assert st2.word_predictive(0, 0) == pytest.approx(0.42394, abs=5e-6)
        del st

    def test_sums_to_one(self):
        st = tiny_state()
        rng = np.random.default_rng(0)
        st.assign_all(rng.integers(0, 3, 7), 3)
        for k in range(st.K):
            total = sum(st.word_predictive(k, w) for w in range(st.V))
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_uninstantiated_topic_rejected(self):
        st = tiny_state()
        st.assign_all(np.zeros(7, dtype=np.int64), 1)
        with pytest.raises(ValidationError):
            st.word_predictive(3, 0)

    def test_new_topic_predictive(self):
        st = tiny_state(V=10)
        assert st.new_topic_predictive(4) == pytest.approx(0.1)
        one = HdpState(np.array([0]), np.array([0, 1]), 1, 1.0, 1.0, 0.01)
        assert one.new_topic_predictive(0) == 1.0

    def test_new_topic_matches_fresh_empty_topic(self):
        st = tiny_state()
        st.assign_all(np.zeros(7, dtype=np.int64), 1)
        k = st.instantiate_topic(np.random.default_rng(0))
        for w in range(st.V):
            assert st.word_predictive(k, w) == pytest.approx(st.new_topic_predictive(w))


class TestTopicLifecycle:
    def test_stick_break_arithmetic(self):
        st = tiny_state()
        st.assign_all(np.zeros(7, dtype=np.int64), 1)
        st._beta[0] = 0.6
        st.beta_new = 0.4

        class FixedRng:
            def random(self):
                return 0.5  # Beta(1, 1): b = 1 - 0.5 = 0.5

        st.gamma = 1.0
        k = st.instantiate_topic(FixedRng())
        assert st._beta[k] == pytest.approx(0.2)
        assert st.beta_new == pytest.approx(0.2)

    def test_mass_conserved(self):
        st = tiny_state()
        st.assign_all(np.zeros(7, dtype=np.int64), 1)
        st._beta[0] = 0.7
        st.beta_new = 0.3
        rng = np.random.default_rng(5)
        for _ in range(20):
            st.instantiate_topic(rng)
        assert st._beta[: st.K].sum() + st.beta_new == pytest.approx(1.0, abs=1e-12)

    def test_instantiate_compact_roundtrip_restores_beta_new(self):
        st = tiny_state()
        st.assign_all(np.zeros(7, dtype=np.int64), 1)
        st._beta[0] = 0.55
        st.beta_new = 0.45
        before = st.beta_new
        st.instantiate_topic(np.random.default_rng(3))
        st.compact_topics()
        assert abs(st.beta_new - before) < 1e-15

    def test_compact_mapping_and_mass_return(self):
        st = tiny_state()
        # three topics, middle one empty
        st.assign_all(np.array([0, 0, 2, 0, 2, 2, 0]), 3)
        st._beta[:3] = [0.3, 0.2, 0.4]
        st.beta_new = 0.1
        mapping = st.compact_topics()
        assert mapping == {0: 0, 2: 1}
        assert st.K == 2
        assert st.beta_new == pytest.approx(0.3)
        assert set(np.unique(st.z)) == {0, 1}
        st.validate(check_tables=False, compacted=True)

    def test_compact_identity_when_none_empty(self):
        st = tiny_state()
        st.assign_all(np.array([0, 1, 0, 1, 0, 1, 0]), 2)
        assert st.compact_topics() == {0: 0, 1: 1}

    def test_compact_everything_empty(self):
        st = HdpState(np.zeros(0, np.int64), np.array([0]), 5, 1.0, 1.0, 0.01)
        st.K = 3
        st._beta[:3] = [0.2, 0.3, 0.4]
        st.beta_new = 0.1
        assert st.compact_topics() == {}
        assert st.K == 0
        assert st.beta_new == pytest.approx(1.0)


class TestConcentrationResampling:
    def test_prior_reproduction_without_data(self):
        st = HdpState(np.zeros(0, np.int64), np.array([0]), 5, 1.0, 1.0, 0.01)
        prior = ConcentrationPrior(1.0, 1.0)
        rng = np.random.default_rng(11)
        draws = np.empty(100_000)
        for i in range(len(draws)):
            a, _ = st.resample_concentrations(prior, prior, rng)
            draws[i] = a
        # Gamma(1,1) has mean 1, var 1: SE over 1e5 draws is ~0.0032
        assert draws.mean() == pytest.approx(1.0, abs=0.01)

    def test_positive_and_reproducible(self):
        st = tiny_state()
        st.assign_all(np.array([0, 1, 0, 1, 0, 1, 0]), 2)
        st._m_dk[:, :2] = 1
        prior = ConcentrationPrior(1.0, 1.0)
        a1, g1 = st.resample_concentrations(prior, prior, np.random.default_rng(7))
        assert a1 > 0 and g1 > 0
        st.alpha, st.gamma = 1.0, 1.0
        a2, g2 = st.resample_concentrations(prior, prior, np.random.default_rng(7))
        assert (a1, g1) == (a2, g2)

    def test_posterior_concentrates_with_many_tables(self):
        # one table per topic (8 dishes from 8 tables) pulls gamma upward
        st = HdpState(np.zeros(50, np.int64), np.array([0, 50]), 5, 1.0, 1.0, 0.01)
        st.assign_all(np.repeat(np.arange(8), [43, 1, 1, 1, 1, 1, 1, 1]), 8)
        st._m_dk[0, :8] = 1
        prior = ConcentrationPrior(1.0, 1.0)
        rng = np.random.default_rng(0)
        draws = []
        for _ in range(2000):
            st.gamma = 1.0
            _, g = st.resample_concentrations(prior, prior, rng)
            draws.append(g)
        assert np.mean(draws) > 1.5


class TestValidate:
    def test_detects_count_drift(self):
        st = tiny_state()
        st.assign_all(np.array([0, 1, 0, 1, 0, 1, 0]), 2)
        st._m_dk[:, :2] = 1
        st.validate()
        st._c_k[0] += 1
        with pytest.raises(ValidationError):
            st.validate()

    def test_detects_broken_simplex(self):
        st = tiny_state()
        st.assign_all(np.zeros(7, np.int64), 1)
        st._m_dk[:, 0] = 1
        st._beta[0] = 0.9
        st.beta_new = 0.2
        with pytest.raises(ValidationError, match="sum"):
            st.validate()

    def test_detects_bad_table_counts(self):
        st = tiny_state()
        st.assign_all(np.zeros(7, np.int64), 1)
        st._m_dk[0, 0] = 99  # > n_dk
        with pytest.raises(ValidationError, match="table"):
            st.validate()
