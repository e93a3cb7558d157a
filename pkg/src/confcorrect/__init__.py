"""Entropy-based ASR confidence scoring and confidence-guided LLM correction.

Pipeline: load a hypothesis manifest, score frame/word/sentence confidences,
decide per utterance whether (and how) to invoke a corrector backend, then
evaluate WER and attempt/help/harm behavior before and after correction.
"""

from .alignment import Alignment, EditOp, align, corpus_wer, edit_distance, utterance_wer
from .backends import (
    BackendConfig,
    BatchOutcome,
    CorrectionRecord,
    PromptCache,
    correct,
    correct_batch,
    prompt_hash,
)
from .confidence import (
    aggregate_word,
    gibbs_confidence,
    score_utterance,
    sentence_confidence,
    tsallis_confidence,
)
from .estimators import ConfidenceScorer, CorrectionPolicy
from .evaluation import (
    BucketStats,
    EvaluationRun,
    SweepGrid,
    SweepReport,
    SweepRow,
    UtteranceResult,
    bucket_analysis,
    emit_report,
    evaluate_run,
    load_report_json,
    sweep,
)
from .manifest import (
    ManifestError,
    join_references,
    load_manifest,
    load_reference_file,
    save_manifest,
)
from .normalize import DEFAULT_NORMALIZER, NormalizationConfig, normalize_text
from .strategy import (
    CorrectionDecision,
    StrategyConfig,
    decide,
    export_training_pairs,
    format_confidence,
    parse_correction,
    render_prompt,
)
from .types import ConfidenceConfig, FrameDistribution, Utterance, WordHypothesis
from .validation import ConfCorrectError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "Alignment",
    "BackendConfig",
    "BatchOutcome",
    "BucketStats",
    "ConfCorrectError",
    "ConfidenceConfig",
    "ConfidenceScorer",
    "CorrectionDecision",
    "CorrectionPolicy",
    "CorrectionRecord",
    "DEFAULT_NORMALIZER",
    "EditOp",
    "EvaluationRun",
    "FrameDistribution",
    "ManifestError",
    "NormalizationConfig",
    "PromptCache",
    "StrategyConfig",
    "SweepGrid",
    "SweepReport",
    "SweepRow",
    "Utterance",
    "UtteranceResult",
    "ValidationError",
    "WordHypothesis",
    "aggregate_word",
    "align",
    "bucket_analysis",
    "correct",
    "correct_batch",
    "corpus_wer",
    "decide",
    "edit_distance",
    "emit_report",
    "evaluate_run",
    "export_training_pairs",
    "format_confidence",
    "gibbs_confidence",
    "join_references",
    "load_manifest",
    "load_reference_file",
    "load_report_json",
    "normalize_text",
    "parse_correction",
    "prompt_hash",
    "render_prompt",
    "save_manifest",
    "score_utterance",
    "sentence_confidence",
    "sweep",
    "tsallis_confidence",
    "utterance_wer",
]
