"""Scikit-learn style estimators wrapping the scoring and strategy steps.

Both estimators are stateless transforms over utterance lists: ``fit`` only
validates parameters, so they clone, grid-search, and pipeline like any
other sklearn component.

    >>> pipeline = Pipeline([
    ...     ("score", ConfidenceScorer(alpha=0.9, aggregation="product")),
    ...     ("gate", CorrectionPolicy(strategy="word_filter", threshold=0.9)),
    ... ])
    >>> decisions = pipeline.predict(utterances)
"""

from __future__ import annotations

from typing import Optional, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .confidence import score_utterance
from .strategy import CorrectionDecision, StrategyConfig, decide
from .types import ConfidenceConfig, Utterance


class ConfidenceScorer(BaseEstimator, TransformerMixin):
    """Fills word and sentence confidences on utterances.

    Parameters mirror ``ConfidenceConfig``: entropy measure (``gibbs`` or
    ``tsallis``), the Tsallis index ``alpha`` in (0, 1], and the frame
    aggregation (``mean``, ``min``, ``product``).
    """

    def __init__(
        self,
        measure: str = "tsallis",
        alpha: float = 0.9,
        aggregation: str = "product",
        alpha_gibbs_switch_epsilon: float = 1e-6,
    ):
        self.measure = measure
        self.alpha = alpha
        self.aggregation = aggregation
        self.alpha_gibbs_switch_epsilon = alpha_gibbs_switch_epsilon

    def _config(self) -> ConfidenceConfig:
        return ConfidenceConfig(
            measure=self.measure,
            alpha=self.alpha,
            aggregation=self.aggregation,
            alpha_gibbs_switch_epsilon=self.alpha_gibbs_switch_epsilon,
        )

    def fit(self, X: Sequence[Utterance], y=None) -> "ConfidenceScorer":
        self._config()
        return self

    def transform(self, X: Sequence[Utterance]) -> list[Utterance]:
        cfg = self._config()
        return [score_utterance(u, cfg) for u in X]

    def __sklearn_is_fitted__(self) -> bool:
        return True  # stateless


class CorrectionPolicy(BaseEstimator):
    """Predicts per-utterance correction decisions from scored utterances."""

    def __init__(
        self,
        strategy: str = "confidence_prompt",
        threshold: Optional[float] = None,
        prompt_template: Optional[str] = None,
        confidence_decimals: int = 2,
    ):
        self.strategy = strategy
        self.threshold = threshold
        self.prompt_template = prompt_template
        self.confidence_decimals = confidence_decimals

    def _config(self) -> StrategyConfig:
        return StrategyConfig(
            kind=self.strategy,
            threshold=self.threshold,
            prompt_template=self.prompt_template,
            confidence_decimals=self.confidence_decimals,
        )

    def fit(self, X: Sequence[Utterance], y=None) -> "CorrectionPolicy":
        self._config()
        return self

    def predict(self, X: Sequence[Utterance]) -> list[CorrectionDecision]:
        cfg = self._config()
        return [decide(u, cfg) for u in X]

    def __sklearn_is_fitted__(self) -> bool:
        return True  # stateless
