"""Hypothesis manifest ingestion and serialization.

A manifest is line-delimited JSON, one utterance per line, UTF-8. Normative
fields:

    id        string, unique within the manifest
    dataset   string tag (e.g. "SAP-shared")
    reference string, optional raw transcript
    words     array of {"text": str, "frames": [[float, ...], ...]}

Scored manifests additionally carry ``word_confidence`` per word and
``sentence_confidence`` per utterance; both round-trip losslessly.

References can also live in a separate tab-separated file

    id<TAB>transcript

and be joined onto a manifest afterwards.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

from .normalize import DEFAULT_NORMALIZER, NormalizationConfig, normalize_text
from .types import FrameDistribution, Utterance, WordHypothesis
from .validation import ValidationError


class ManifestError(ValidationError):
    """Malformed manifest content; message carries the offending line."""


def _parse_word(raw: object, utt_id: str, index: int, cfg: NormalizationConfig) -> WordHypothesis:
    if not isinstance(raw, dict) or "text" not in raw or "frames" not in raw:
        raise ManifestError(f"utterance {utt_id!r} word {index}: expected an object with 'text' and 'frames'")
    words = normalize_text(str(raw["text"]), cfg)
    if len(words) != 1:
        raise ManifestError(
            f"utterance {utt_id!r} word {index}: text {raw['text']!r} does not normalize to exactly one word"
        )
    frames = raw["frames"]
    if not isinstance(frames, list) or not frames:
        raise ManifestError(f"utterance {utt_id!r} word {index}: 'frames' must be a non-empty array")
    dists = tuple(
        FrameDistribution.from_raw(frame, context=f"utterance {utt_id!r} word {index} frame {k}")
        for k, frame in enumerate(frames)
    )
    sizes = {d.vocab_size for d in dists}
    if len(sizes) > 1:
        raise ManifestError(
            f"utterance {utt_id!r} word {index}: frames mix vocabulary sizes {sorted(sizes)}"
        )
    confidence = raw.get("word_confidence")
    return WordHypothesis(text=words[0], frames=dists, word_confidence=confidence)


def _parse_record(record: dict, cfg: NormalizationConfig) -> Utterance:
    try:
        utt_id = str(record["id"])
    except KeyError:
        raise ManifestError("record is missing required field 'id'") from None
    dataset = str(record.get("dataset") or "default")
    reference = tuple(normalize_text(str(record.get("reference") or ""), cfg))
    raw_words = record.get("words", [])
    if not isinstance(raw_words, list):
        raise ManifestError(f"utterance {utt_id!r}: 'words' must be an array")
    hypothesis = tuple(_parse_word(w, utt_id, i, cfg) for i, w in enumerate(raw_words))
    return Utterance(
        id=utt_id,
        hypothesis=hypothesis,
        reference=reference,
        sentence_confidence=record.get("sentence_confidence"),
        dataset=dataset,
    )


def load_manifest(
    path: str | Path,
    normalizer: NormalizationConfig = DEFAULT_NORMALIZER,
) -> list[Utterance]:
    """Load and validate a hypothesis manifest.

    Raises ManifestError naming the line number for malformed records,
    invalid probability vectors, and duplicate ids.
    """
    path = Path(path)
    utterances: list[Utterance] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            try:
                utt = _parse_record(record, normalizer)
            except ValidationError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
            if utt.id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate utterance id {utt.id!r}")
            seen.add(utt.id)
            utterances.append(utt)
    return utterances


def utterance_to_record(utt: Utterance) -> dict:
    """Serialize one utterance back to its manifest record."""
    record: dict = {"id": utt.id, "dataset": utt.dataset}
    if utt.reference:
        record["reference"] = " ".join(utt.reference)
    words = []
    for w in utt.hypothesis:
        entry: dict = {"text": w.text, "frames": [list(f.probs) for f in w.frames]}
        if w.word_confidence is not None:
            entry["word_confidence"] = w.word_confidence
        words.append(entry)
    record["words"] = words
    if utt.sentence_confidence is not None:
        record["sentence_confidence"] = utt.sentence_confidence
    return record


def save_manifest(utterances: Iterable[Utterance], path: str | Path) -> int:
    """Write utterances as a manifest; returns the number of records written."""
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for utt in utterances:
            handle.write(json.dumps(utterance_to_record(utt), ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count


def load_reference_file(
    path: str | Path,
    normalizer: NormalizationConfig = DEFAULT_NORMALIZER,
) -> dict[str, tuple[str, ...]]:
    """Load a tab-separated ``id<TAB>transcript`` reference file."""
    path = Path(path)
    refs: dict[str, tuple[str, ...]] = {}
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ManifestError(f"{path}:{lineno}: expected 'id<TAB>transcript'")
            utt_id, transcript = line.split("\t", 1)
            if utt_id in refs:
                raise ManifestError(f"{path}:{lineno}: duplicate reference id {utt_id!r}")
            refs[utt_id] = tuple(normalize_text(transcript, normalizer))
    return refs


def join_references(
    utterances: Iterable[Utterance],
    references: Mapping[str, tuple[str, ...]],
) -> list[Utterance]:
    """Attach references to utterances by id.

    Every utterance id must appear in ``references``; missing ids are
    reported together. Extra reference ids are ignored.
    """
    utterances = list(utterances)
    missing = [u.id for u in utterances if u.id not in references]
    if missing:
        raise ManifestError(f"no reference for utterance ids: {', '.join(sorted(missing))}")
    from dataclasses import replace

    return [replace(u, reference=tuple(references[u.id])) for u in utterances]
