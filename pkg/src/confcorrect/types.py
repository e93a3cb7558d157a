"""Core domain types for the confidence-correction pipeline.

All containers are frozen dataclasses validated on construction, so an
object that exists is an object that passed its invariants. Loaded data is
therefore safe to share across worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .validation import (
    ValidationError,
    check_choice,
    check_probability_vector,
    check_unit_interval,
)

CONFIDENCE_MEASURES = ("gibbs", "tsallis")
AGGREGATIONS = ("mean", "min", "product")


@dataclass(frozen=True)
class FrameDistribution:
    """One decoder frame's posterior over the token vocabulary."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", check_probability_vector(self.probs))

    @property
    def vocab_size(self) -> int:
        return len(self.probs)

    @classmethod
    def from_raw(cls, values, context: str = "") -> "FrameDistribution":
        """Build from any float sequence, naming ``context`` in errors."""
        return cls(check_probability_vector(values, context))


@dataclass(frozen=True)
class WordHypothesis:
    """A hypothesized word with its frame posteriors and aggregated confidence."""

    text: str
    frames: tuple[FrameDistribution, ...]
    word_confidence: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValidationError("word text must be non-empty")
        if any(ch.isspace() for ch in self.text):
            raise ValidationError(f"word text must not contain whitespace: {self.text!r}")
        if not self.frames:
            raise ValidationError(f"word {self.text!r} has no frames")
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.word_confidence is not None:
            check_unit_interval(self.word_confidence, f"word_confidence of {self.text!r}")

    def with_confidence(self, value: float) -> "WordHypothesis":
        return replace(self, word_confidence=value)


@dataclass(frozen=True)
class Utterance:
    """One utterance's pipeline state: reference, hypothesis, confidences.

    ``reference`` may be empty (unlabeled mode); evaluation then excludes the
    utterance and reports the exclusion instead of failing.
    """

    id: str
    hypothesis: tuple[WordHypothesis, ...]
    reference: tuple[str, ...] = ()
    sentence_confidence: Optional[float] = None
    dataset: str = "default"

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("utterance id must be non-empty")
        object.__setattr__(self, "hypothesis", tuple(self.hypothesis))
        object.__setattr__(self, "reference", tuple(self.reference))
        if self.sentence_confidence is not None:
            check_unit_interval(self.sentence_confidence, f"sentence_confidence of {self.id!r}")

    @property
    def hypothesis_words(self) -> list[str]:
        return [w.text for w in self.hypothesis]

    @property
    def word_confidences(self) -> list[Optional[float]]:
        return [w.word_confidence for w in self.hypothesis]


@dataclass(frozen=True)
class ConfidenceConfig:
    """Which entropy measure to use and how frame scores become word scores.

    ``alpha`` is the Tsallis entropic index, restricted to (0, 1]. Values
    within ``alpha_gibbs_switch_epsilon`` of 1 fall back to the Gibbs score,
    which is the analytic limit of the Tsallis score at alpha = 1.
    """

    measure: str = "tsallis"
    alpha: float = 0.9
    aggregation: str = "product"
    alpha_gibbs_switch_epsilon: float = 1e-6

    def __post_init__(self) -> None:
        check_choice(self.measure, CONFIDENCE_MEASURES, "measure")
        check_choice(self.aggregation, AGGREGATIONS, "aggregation")
        if not 0.0 < self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in (0, 1], got {self.alpha!r}")
        if self.alpha_gibbs_switch_epsilon < 0:
            raise ValidationError("alpha_gibbs_switch_epsilon must be >= 0")

    def describe(self) -> str:
        return (
            f"measure={self.measure} alpha={self.alpha} aggregation={self.aggregation}"
        )
