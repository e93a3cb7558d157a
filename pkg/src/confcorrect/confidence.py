"""Entropy-based confidence scoring.

Frame-level confidences come from the token posterior's entropy, normalized
so that 1 means a one-hot (certain) distribution and 0 means uniform
(maximally uncertain). Two measures are supported:

* Gibbs: one minus the Shannon entropy over its maximum ``ln V``.
* Tsallis: the generalized-entropy analogue with entropic index ``alpha``;
  smaller alpha reacts more strongly to peaked distributions, and the
  alpha -> 1 limit recovers the Gibbs score.

Frame scores aggregate to words (mean, min, or product) and word scores to a
sentence score (geometric mean). All outputs are clamped to [0, 1] so the
range invariant holds exactly despite float rounding.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .types import ConfidenceConfig, FrameDistribution, Utterance, WordHypothesis
from .validation import ValidationError


def _clamp(value: float) -> float:
    return 0.0 if value < 0.0 else (1.0 if value > 1.0 else value)


def gibbs_confidence(dist: FrameDistribution) -> float:
    """Normalized Shannon-entropy confidence: 1 + (1/ln V) * sum p ln p.

    Uses the convention 0 * ln 0 = 0 so sparse vectors are well defined.
    """
    total = math.fsum(p * math.log(p) for p in dist.probs if p > 0.0)
    return _clamp(1.0 + total / math.log(dist.vocab_size))


def tsallis_confidence(
    dist: FrameDistribution,
    alpha: float,
    switch_epsilon: float = 1e-6,
) -> float:
    """Tsallis-entropy confidence (V^(1-a) - sum p^a) / (V^(1-a) - 1).

    ``alpha`` must lie in (0, 1]. Within ``switch_epsilon`` of 1 the formula
    is numerically 0/0, so the Gibbs score (its analytic limit) is returned
    instead. Uses the convention 0^a = 0.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValidationError(f"alpha must be in (0, 1], got {alpha!r}")
    if abs(alpha - 1.0) < switch_epsilon:
        return gibbs_confidence(dist)
    scale = dist.vocab_size ** (1.0 - alpha)
    power_sum = math.fsum(p**alpha for p in dist.probs if p > 0.0)
    return _clamp((scale - power_sum) / (scale - 1.0))


def frame_confidence(dist: FrameDistribution, cfg: ConfidenceConfig) -> float:
    """Score one frame under the configured measure."""
    if cfg.measure == "gibbs":
        return gibbs_confidence(dist)
    return tsallis_confidence(dist, cfg.alpha, cfg.alpha_gibbs_switch_epsilon)


def aggregate_word(frame_scores: list[float], method: str) -> float:
    """Collapse frame confidences into one word confidence.

    ``method`` is one of mean, min, product. The product is evaluated in
    log space so long words cannot underflow; a singleton list returns its
    value unchanged under every method.
    """
    if not frame_scores:
        raise ValidationError("cannot aggregate an empty list of frame scores")
    if len(frame_scores) == 1:
        return frame_scores[0]
    if method == "mean":
        return _clamp(math.fsum(frame_scores) / len(frame_scores))
    if method == "min":
        return min(frame_scores)
    if method == "product":
        if any(s == 0.0 for s in frame_scores):
            return 0.0
        return _clamp(math.exp(math.fsum(math.log(s) for s in frame_scores)))
    raise ValidationError(f"unknown aggregation method {method!r}")


def sentence_confidence(word_scores: list[float]) -> float:
    """Geometric mean of word confidences; 0 if any word score is 0."""
    if not word_scores:
        raise ValidationError("cannot compute sentence confidence of an empty list")
    if len(word_scores) == 1:
        return word_scores[0]
    if any(s == 0.0 for s in word_scores):
        return 0.0
    return _clamp(math.exp(math.fsum(math.log(s) for s in word_scores) / len(word_scores)))


def score_word(word: WordHypothesis, cfg: ConfidenceConfig) -> WordHypothesis:
    scores = [frame_confidence(f, cfg) for f in word.frames]
    return word.with_confidence(aggregate_word(scores, cfg.aggregation))


def score_utterance(utterance: Utterance, cfg: ConfidenceConfig) -> Utterance:
    """Fill word and sentence confidences; all other fields are unchanged.

    An empty hypothesis gets sentence confidence 0.0 (maximally uncertain),
    so empty ASR output stays eligible for correction.
    """
    words = tuple(score_word(w, cfg) for w in utterance.hypothesis)
    if words:
        sent = sentence_confidence([w.word_confidence for w in words])
    else:
        sent = 0.0
    return replace(utterance, hypothesis=words, sentence_confidence=sent)
