"""Correction strategies and prompt rendering.

Four strategies decide when a hypothesis goes to the corrector:

* ``naive``             - correct every hypothesis
* ``sentence_filter``   - correct iff sentence confidence < threshold
* ``word_filter``       - correct iff any word confidence < threshold
* ``confidence_prompt`` - correct every hypothesis, embedding per-word
                          confidence scores in the prompt

Thresholds compare strictly: a confidence exactly at the threshold does not
trigger. Prompts are rendered byte-exact from versioned template files with
``{{WORDS}}`` / ``{{WORDS_WITH_CONF}}`` placeholders; confidences are printed
with a fixed number of decimals, rounded half-up.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .normalize import DEFAULT_NORMALIZER, NormalizationConfig, normalize_text
from .types import Utterance
from .validation import ConfCorrectError, ValidationError, check_choice

STRATEGIES = ("naive", "sentence_filter", "word_filter", "confidence_prompt")
FILTER_STRATEGIES = ("sentence_filter", "word_filter")

TRIGGER_ALWAYS = "always"
TRIGGER_SENTENCE = "sentence_below_threshold"
TRIGGER_WORD = "word_below_threshold"
TRIGGER_NONE = "not_triggered"

#: Question-line placeholder when the hypothesis has no words at all.
EMPTY_HYPOTHESIS_TOKEN = "<EMPTY>"

#: Marker separating prompt scaffolding from the corrected sentence.
CORRECTION_MARKER = "Correction:"

_BUILTIN_TEMPLATES = ("confidence_v1", "naive_v1")
_BRACKET_ANNOTATION = re.compile(r"\[[^\[\]]*\]")


class TemplateError(ConfCorrectError):
    """Unknown template name or unreadable template file."""


@dataclass(frozen=True)
class StrategyConfig:
    """Which strategy runs, its threshold, and how prompts are rendered.

    ``threshold`` is required for the two filter strategies and must be
    absent otherwise. ``prompt_template`` defaults to ``confidence_v1`` for
    confidence prompting and ``naive_v1`` for everything else; it may also
    be a path to a custom template file.
    """

    kind: str
    threshold: Optional[float] = None
    prompt_template: Optional[str] = None
    confidence_decimals: int = 2

    def __post_init__(self) -> None:
        check_choice(self.kind, STRATEGIES, "strategy kind")
        if self.kind in FILTER_STRATEGIES:
            if self.threshold is None:
                raise ValidationError(f"strategy {self.kind!r} requires a threshold")
            if not 0.0 <= self.threshold <= 1.0:
                raise ValidationError(f"threshold must be in [0, 1], got {self.threshold!r}")
        elif self.threshold is not None:
            raise ValidationError(f"strategy {self.kind!r} does not take a threshold")
        if self.confidence_decimals < 1:
            raise ValidationError("confidence_decimals must be >= 1")

    @property
    def template_name(self) -> str:
        if self.prompt_template is not None:
            return self.prompt_template
        return "confidence_v1" if self.kind == "confidence_prompt" else "naive_v1"

    def describe(self) -> str:
        parts = [f"kind={self.kind}"]
        if self.threshold is not None:
            parts.append(f"threshold={self.threshold}")
        parts.append(f"template={self.template_name}")
        return " ".join(parts)


@dataclass(frozen=True)
class CorrectionDecision:
    should_correct: bool
    trigger: str
    prompt: Optional[str] = None

    def __post_init__(self) -> None:
        if self.should_correct != (self.prompt is not None):
            raise ValidationError("decision must carry a prompt exactly when it corrects")


def strip_confidence_annotations(text: str) -> str:
    """Remove ``[0.85]``-style bracket annotations from a line of text."""
    return _BRACKET_ANNOTATION.sub(" ", text)


def load_template(name: str) -> str:
    """Resolve a template by builtin name or filesystem path."""
    if name in _BUILTIN_TEMPLATES:
        return resources.files("confcorrect.templates").joinpath(f"{name}.txt").read_text("utf-8")
    path = Path(name)
    if path.is_file():
        return path.read_text("utf-8")
    raise TemplateError(f"template not found: {name!r} (builtins: {', '.join(_BUILTIN_TEMPLATES)})")


def format_confidence(value: float, decimals: int = 2) -> str:
    """Fixed-decimal confidence, rounded half-up on the shortest repr."""
    quantum = Decimal(1).scaleb(-decimals)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def words_with_confidence(utterance: Utterance, decimals: int = 2) -> str:
    """The annotated question line, e.g. ``HOW[1.00] MANY[0.85]``."""
    parts = []
    for word in utterance.hypothesis:
        if word.word_confidence is None:
            raise ValidationError(f"word {word.text!r} in {utterance.id!r} has no confidence; score the manifest first")
        parts.append(f"{word.text}[{format_confidence(word.word_confidence, decimals)}]")
    return " ".join(parts) if parts else EMPTY_HYPOTHESIS_TOKEN


def render_prompt(utterance: Utterance, cfg: StrategyConfig) -> str:
    """Instantiate the strategy's template for one utterance, byte-exact."""
    template = load_template(cfg.template_name)
    if "{{WORDS_WITH_CONF}}" in template:
        template = template.replace(
            "{{WORDS_WITH_CONF}}", words_with_confidence(utterance, cfg.confidence_decimals)
        )
    if "{{WORDS}}" in template:
        plain = " ".join(utterance.hypothesis_words) or EMPTY_HYPOTHESIS_TOKEN
        template = template.replace("{{WORDS}}", plain)
    return template


def decide(utterance: Utterance, cfg: StrategyConfig) -> CorrectionDecision:
    """Apply the configured strategy to one scored utterance."""
    if cfg.kind == "naive":
        return CorrectionDecision(True, TRIGGER_ALWAYS, render_prompt(utterance, cfg))
    if cfg.kind == "confidence_prompt":
        return CorrectionDecision(True, TRIGGER_ALWAYS, render_prompt(utterance, cfg))
    if cfg.kind == "sentence_filter":
        if utterance.sentence_confidence is None:
            raise ValidationError(f"utterance {utterance.id!r} has no sentence confidence; score the manifest first")
        if utterance.sentence_confidence < cfg.threshold:
            return CorrectionDecision(True, TRIGGER_SENTENCE, render_prompt(utterance, cfg))
        return CorrectionDecision(False, TRIGGER_NONE)
    # word_filter
    confidences = utterance.word_confidences
    if any(c is None for c in confidences):
        raise ValidationError(f"utterance {utterance.id!r} has unscored words; score the manifest first")
    if any(c < cfg.threshold for c in confidences):
        return CorrectionDecision(True, TRIGGER_WORD, render_prompt(utterance, cfg))
    return CorrectionDecision(False, TRIGGER_NONE)


def parse_correction_full(
    raw_output: str,
    normalizer: NormalizationConfig = DEFAULT_NORMALIZER,
) -> tuple[list[str], bool]:
    """Extract the corrected word list from raw corrector output.

    Strips everything up to and including the last ``Correction:`` marker,
    drops any echoed ``[0.97]``-style annotations and empty-hypothesis
    placeholders, then normalizes. Returns the words plus a flag saying
    whether any scaffolding had to be stripped.
    """
    text = raw_output
    salvaged = False
    if CORRECTION_MARKER in text:
        text = text.rsplit(CORRECTION_MARKER, 1)[1]
        salvaged = True
    if _BRACKET_ANNOTATION.search(text):
        text = strip_confidence_annotations(text)
        salvaged = True
    if EMPTY_HYPOTHESIS_TOKEN in text:
        text = text.replace(EMPTY_HYPOTHESIS_TOKEN, " ")
        salvaged = True
    return normalize_text(text, normalizer), salvaged


def parse_correction(
    raw_output: str,
    normalizer: NormalizationConfig = DEFAULT_NORMALIZER,
) -> list[str]:
    """Corrected word list only; see ``parse_correction_full``."""
    return parse_correction_full(raw_output, normalizer)[0]


def export_training_pairs(
    utterances: Iterable[Utterance],
    cfg: StrategyConfig,
    out: str | Path,
) -> int:
    """Write ``{"prompt", "completion"}`` records for corrector fine-tuning.

    The prompt is the rendered strategy prompt; the completion is the joined
    reference. Every utterance must carry a non-empty reference.
    """
    out = Path(out)
    count = 0
    with out.open("w", encoding="utf-8") as handle:
        for utt in utterances:
            if not utt.reference:
                raise ValidationError(f"utterance {utt.id!r} has no reference; cannot export a training pair")
            record = {
                "prompt": render_prompt(utt, cfg),
                "completion": " ".join(utt.reference),
            }
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count
