"""Shared fixtures: hand-built utterances and synthetic corpora."""

from __future__ import annotations

import json
import random

import pytest

from confcorrect.normalize import NormalizationConfig
from confcorrect.types import FrameDistribution, Utterance, WordHypothesis

WORD_POOL = [
    "ALPHA", "BRAVO", "CHARLIE", "DELTA", "ECHO", "FOXTROT", "GOLF", "HOTEL",
    "INDIA", "JULIET", "KILO", "LIMA", "MIKE", "NOVEMBER", "OSCAR", "PAPA",
    "QUEBEC", "ROMEO", "SIERRA", "TANGO",
]


def one_hot(vocab_size: int, index: int = 0) -> FrameDistribution:
    probs = [0.0] * vocab_size
    probs[index] = 1.0
    return FrameDistribution(tuple(probs))


def uniform(vocab_size: int) -> FrameDistribution:
    return FrameDistribution(tuple(1.0 / vocab_size for _ in range(vocab_size)))


def random_frame(rng: random.Random, vocab_size: int = 8, peak: float | None = None) -> FrameDistribution:
    """A peaked posterior with controllable top probability (< 1)."""
    if peak is None:
        peak = rng.uniform(0.3, 0.995)
    rest = [rng.uniform(0.01, 1.0) for _ in range(vocab_size - 1)]
    scale = (1.0 - peak) / sum(rest)
    probs = [peak] + [r * scale for r in rest]
    return FrameDistribution(tuple(probs))


def make_word(rng: random.Random, text: str, n_frames: int | None = None, vocab_size: int = 8) -> WordHypothesis:
    n_frames = n_frames or rng.randint(1, 4)
    frames = tuple(random_frame(rng, vocab_size) for _ in range(n_frames))
    return WordHypothesis(text=text, frames=frames)


def perturb_reference(rng: random.Random, words: list[str]) -> list[str]:
    """Reference = hypothesis with a few random word edits."""
    reference = []
    for w in words:
        roll = rng.random()
        if roll < 0.12:
            continue  # hypothesis word was an insertion
        if roll < 0.28:
            reference.append(rng.choice(WORD_POOL))
        else:
            reference.append(w)
        if rng.random() < 0.08:
            reference.append(rng.choice(WORD_POOL))
    if not reference:
        reference.append(rng.choice(WORD_POOL))
    return reference


def build_synthetic_corpus(
    n: int = 50,
    seed: int = 7,
    datasets: tuple[str, ...] = ("SAP-shared", "SAP-unshared"),
    include_empty_hypothesis: bool = True,
) -> list[Utterance]:
    rng = random.Random(seed)
    utterances = []
    for i in range(n):
        dataset = datasets[i % len(datasets)]
        if include_empty_hypothesis and i == n - 1:
            utterances.append(
                Utterance(
                    id=f"u{i:03d}",
                    hypothesis=(),
                    reference=tuple(rng.choice(WORD_POOL) for _ in range(2)),
                    dataset=dataset,
                )
            )
            continue
        n_words = rng.randint(1, 6)
        texts = [rng.choice(WORD_POOL) for _ in range(n_words)]
        words = tuple(make_word(rng, t) for t in texts)
        utterances.append(
            Utterance(
                id=f"u{i:03d}",
                hypothesis=words,
                reference=tuple(perturb_reference(rng, texts)),
                dataset=dataset,
            )
        )
    return utterances


def scored_utterance(texts_and_confidences, utt_id="u1", dataset="default", reference=(), sentence=None):
    """Utterance with word confidences set directly (frames are one-hot stubs)."""
    words = tuple(
        WordHypothesis(text=t, frames=(one_hot(4),), word_confidence=c)
        for t, c in texts_and_confidences
    )
    return Utterance(
        id=utt_id,
        hypothesis=words,
        reference=tuple(reference),
        sentence_confidence=sentence,
        dataset=dataset,
    )


def write_manifest_lines(path, records) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def fig2_manifest_record(utt_id: str = "fig2", vocab_size: int = 4) -> dict:
    """Manifest record whose Gibbs word confidences are 1.00 / 0.85 / 0.61.

    Built by inverting the binary-entropy confidence with the test-side
    bisection solver, so the scored manifest reproduces the refills example
    end to end (single frame per word).
    """
    from oracles import solve_binary_peak_for_gibbs

    def binary_frame(target: float) -> list[float]:
        peak = solve_binary_peak_for_gibbs(target, vocab_size)
        return [peak, 1.0 - peak] + [0.0] * (vocab_size - 2)

    one_hot_frame = [1.0] + [0.0] * (vocab_size - 1)
    return {
        "id": utt_id,
        "dataset": "SAP-shared",
        "reference": "how many refills",
        "words": [
            {"text": "HOW", "frames": [one_hot_frame]},
            {"text": "MANY", "frames": [binary_frame(0.85)]},
            {"text": "RAFELLES", "frames": [binary_frame(0.61)]},
        ],
    }


@pytest.fixture
def normalizer() -> NormalizationConfig:
    return NormalizationConfig()


@pytest.fixture
def fig2_utterance() -> Utterance:
    """The refills example: one confident word, two uncertain ones."""
    return scored_utterance(
        [("HOW", 1.0), ("MANY", 0.85), ("RAFELLES", 0.61)],
        utt_id="fig2",
        reference=("HOW", "MANY", "REFILLS"),
        sentence=0.8033711905546127,
    )


@pytest.fixture
def synthetic_corpus() -> list[Utterance]:
    return build_synthetic_corpus()
