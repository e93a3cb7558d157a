"""Transcript text normalization.

Every piece of text in the pipeline (references, hypothesis words, corrector
output) passes through the same normalizer so that WER and attempt/help/harm
labels never hinge on casing or punctuation. The default mirrors the form
ASR transcripts arrive in here: uppercase words, apostrophes kept, all other
punctuation dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


@dataclass(frozen=True)
class NormalizationConfig:
    """How raw text is turned into a canonical word list.

    uppercase: fold text to uppercase before filtering.
    keep_chars: characters retained besides A-Z and 0-9 (default apostrophe).
    """

    uppercase: bool = True
    keep_chars: str = "'"

    def describe(self) -> str:
        return f"uppercase={self.uppercase} keep_chars={self.keep_chars!r}"


DEFAULT_NORMALIZER = NormalizationConfig()


def _filter_pattern(cfg: NormalizationConfig) -> re.Pattern[str]:
    letters = "A-Z0-9" if cfg.uppercase else "A-Za-z0-9"
    kept = re.escape(cfg.keep_chars)
    return re.compile(f"[^{letters}{kept}\\s]+")


def normalize_text(raw: str, cfg: NormalizationConfig = DEFAULT_NORMALIZER) -> list[str]:
    """Normalize a transcript into a list of canonical words.

    Uppercases (per config), deletes every character outside the allowed set,
    and collapses whitespace. Deterministic; empty input gives an empty list.
    """
    text = raw.upper() if cfg.uppercase else raw
    text = _filter_pattern(cfg).sub("", text)
    return text.split()


def normalize_join(raw: str, cfg: NormalizationConfig = DEFAULT_NORMALIZER) -> str:
    """Normalized text re-joined with single spaces."""
    return " ".join(normalize_text(raw, cfg))
