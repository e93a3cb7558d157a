"""Entropy confidence scores, aggregation, and sentence confidence."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from confcorrect.confidence import (
    aggregate_word,
    gibbs_confidence,
    score_utterance,
    sentence_confidence,
    tsallis_confidence,
)
from confcorrect.types import ConfidenceConfig, FrameDistribution, Utterance, WordHypothesis
from confcorrect.validation import ValidationError

from conftest import one_hot, uniform
from oracles import (
    GEOMEAN_FIG2,
    GIBBS_HALF_HALF,
    TSALLIS_HALF_HALF_A05,
    gibbs_oracle,
    tsallis_oracle,
)

ALPHA_GRID = (0.3, 0.5, 0.7, 0.9)
HALF_HALF = FrameDistribution((0.5, 0.5, 0.0, 0.0))


def random_simplex(rng, max_vocab=64) -> FrameDistribution:
    size = rng.integers(2, max_vocab + 1)
    probs = rng.dirichlet(np.ones(size))
    return FrameDistribution(tuple(float(p) for p in probs))


simplexes = st.integers(min_value=2, max_value=24).flatmap(
    lambda size: st.lists(
        st.floats(min_value=1e-4, max_value=1.0), min_size=size, max_size=size
    )
).map(lambda raw: FrameDistribution(tuple(v / sum(raw) for v in raw)))

unit_values = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


class TestGibbs:
    def test_uniform_is_zero(self):
        assert gibbs_confidence(uniform(4)) == 0.0

    def test_one_hot_is_one(self):
        for vocab in (2, 8, 128):
            assert gibbs_confidence(one_hot(vocab)) == 1.0

    def test_half_half_matches_oracle(self):
        assert gibbs_confidence(HALF_HALF) == pytest.approx(GIBBS_HALF_HALF, abs=1e-12)

    @given(simplexes)
    def test_in_unit_interval(self, dist):
        assert 0.0 <= gibbs_confidence(dist) <= 1.0

    def test_agrees_with_high_precision_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            dist = random_simplex(rng)
            assert gibbs_confidence(dist) == pytest.approx(gibbs_oracle(dist.probs), abs=1e-10)


class TestTsallis:
    def test_uniform_is_zero_across_grid(self):
        for vocab in (2, 8, 128):
            for alpha in ALPHA_GRID:
                assert abs(tsallis_confidence(uniform(vocab), alpha)) <= 1e-12

    def test_one_hot_is_one_across_grid(self):
        for vocab in (2, 8, 128):
            for alpha in ALPHA_GRID:
                assert abs(tsallis_confidence(one_hot(vocab), alpha) - 1.0) <= 1e-12

    def test_half_half_alpha_05_matches_oracle(self):
        value = tsallis_confidence(HALF_HALF, 0.5)
        assert value == pytest.approx(TSALLIS_HALF_HALF_A05, abs=1e-12)
        assert value == pytest.approx(2.0 - math.sqrt(2.0), abs=1e-12)

    def test_alpha_out_of_range_rejected(self):
        for alpha in (0.0, -0.5, 1.5):
            with pytest.raises(ValidationError):
                tsallis_confidence(HALF_HALF, alpha)

    def test_alpha_near_one_switches_to_gibbs(self):
        alpha = 1.0 - 1e-7
        assert tsallis_confidence(HALF_HALF, alpha) == gibbs_confidence(HALF_HALF)

    def test_limit_matches_gibbs_when_formula_forced(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            dist = random_simplex(rng)
            forced = tsallis_confidence(dist, 1.0 - 1e-7, switch_epsilon=1e-9)
            assert abs(forced - gibbs_confidence(dist)) < 1e-4

    def test_agrees_with_high_precision_oracle(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            dist = random_simplex(rng)
            for alpha in ALPHA_GRID:
                expected = tsallis_oracle(dist.probs, alpha)
                assert tsallis_confidence(dist, alpha) == pytest.approx(expected, abs=1e-10)

    @given(simplexes, st.sampled_from(ALPHA_GRID))
    def test_in_unit_interval(self, dist, alpha):
        assert 0.0 <= tsallis_confidence(dist, alpha) <= 1.0


class TestAggregation:
    def test_min(self):
        assert aggregate_word([0.9, 0.61, 0.99], "min") == 0.61

    def test_product(self):
        assert aggregate_word([0.9, 0.5], "product") == pytest.approx(0.45, abs=1e-12)

    def test_singleton_identity_under_all_methods(self):
        for method in ("mean", "min", "product"):
            assert aggregate_word([0.8], method) == 0.8

    def test_product_with_zero_is_zero(self):
        assert aggregate_word([0.9, 0.0, 0.7], "product") == 0.0

    def test_product_matches_plain_multiplication_for_short_lists(self):
        values = [0.91, 0.7, 0.33, 0.999]
        plain = values[0] * values[1] * values[2] * values[3]
        assert aggregate_word(values, "product") == pytest.approx(plain, abs=1e-12)

    def test_product_survives_long_words_without_underflow_surprises(self):
        values = [0.5] * 600
        result = aggregate_word(values, "product")
        assert result == 0.0 or result < 1e-180

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            aggregate_word([], "mean")

    @given(st.lists(unit_values, min_size=1, max_size=30))
    def test_ordering_product_min_mean(self, values):
        product = aggregate_word(values, "product")
        minimum = aggregate_word(values, "min")
        mean = aggregate_word(values, "mean")
        assert product <= minimum + 1e-12
        assert minimum <= mean + 1e-12

    @given(st.lists(unit_values, min_size=1, max_size=12), st.randoms())
    def test_permutation_invariance(self, values, rnd):
        shuffled = list(values)
        rnd.shuffle(shuffled)
        for method in ("mean", "min", "product"):
            assert aggregate_word(values, method) == aggregate_word(shuffled, method)


class TestSentenceConfidence:
    def test_fig2_values_match_oracle(self):
        assert sentence_confidence([1.0, 0.85, 0.61]) == pytest.approx(GEOMEAN_FIG2, abs=1e-12)

    def test_singleton(self):
        assert sentence_confidence([0.42]) == 0.42

    def test_zero_annihilates(self):
        assert sentence_confidence([0.9, 0.0]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            sentence_confidence([])

    @given(st.lists(unit_values, min_size=1, max_size=12), st.randoms())
    def test_permutation_invariance(self, values, rnd):
        shuffled = list(values)
        rnd.shuffle(shuffled)
        assert sentence_confidence(values) == sentence_confidence(shuffled)

    @given(st.lists(unit_values, min_size=1, max_size=20))
    def test_in_unit_interval(self, values):
        assert 0.0 <= sentence_confidence(values) <= 1.0


class TestScoreUtterance:
    def test_all_one_hot_yields_full_confidence(self):
        words = tuple(
            WordHypothesis(t, (one_hot(4), one_hot(4))) for t in ("A", "B", "C")
        )
        utt = Utterance(id="u", hypothesis=words)
        scored = score_utterance(utt, ConfidenceConfig(measure="gibbs"))
        assert all(w.word_confidence == 1.0 for w in scored.hypothesis)
        assert scored.sentence_confidence == 1.0

    def test_uniform_frame_zeroes_word_and_sentence_under_product(self):
        words = (
            WordHypothesis("A", (one_hot(4), uniform(4))),
            WordHypothesis("B", (one_hot(4),)),
        )
        utt = Utterance(id="u", hypothesis=words)
        cfg = ConfidenceConfig(measure="gibbs", aggregation="product")
        scored = score_utterance(utt, cfg)
        assert scored.hypothesis[0].word_confidence == 0.0
        assert scored.sentence_confidence == 0.0

    def test_gibbs_mean_of_half_half_and_one_hot(self):
        word = WordHypothesis("A", (HALF_HALF, one_hot(4)))
        utt = Utterance(id="u", hypothesis=(word,))
        cfg = ConfidenceConfig(measure="gibbs", aggregation="mean")
        scored = score_utterance(utt, cfg)
        assert scored.hypothesis[0].word_confidence == pytest.approx(0.75, abs=1e-12)
        assert scored.sentence_confidence == pytest.approx(0.75, abs=1e-12)

    def test_empty_hypothesis_gets_zero_sentence_confidence(self):
        utt = Utterance(id="u", hypothesis=(), reference=("HI",))
        scored = score_utterance(utt, ConfidenceConfig())
        assert scored.sentence_confidence == 0.0

    def test_other_fields_unchanged_and_deterministic(self):
        utt = Utterance(
            id="u9",
            hypothesis=(WordHypothesis("A", (HALF_HALF,)),),
            reference=("A", "B"),
            dataset="SAP-shared",
        )
        cfg = ConfidenceConfig(measure="tsallis", alpha=0.5, aggregation="min")
        first = score_utterance(utt, cfg)
        second = score_utterance(utt, cfg)
        assert first == second
        assert first.id == "u9"
        assert first.reference == ("A", "B")
        assert first.dataset == "SAP-shared"
        assert first.hypothesis[0].word_confidence == pytest.approx(
            TSALLIS_HALF_HALF_A05, abs=1e-12
        )


def test_config_validation():
    with pytest.raises(ValidationError):
        ConfidenceConfig(alpha=1.5)
    with pytest.raises(ValidationError):
        ConfidenceConfig(alpha=0.0)
    with pytest.raises(ValidationError):
        ConfidenceConfig(measure="renyi")
    with pytest.raises(ValidationError):
        ConfidenceConfig(aggregation="median")
