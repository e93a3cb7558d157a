"""Manifest ingestion, validation errors, and round-trip serialization."""

import pytest

from confcorrect.manifest import (
    ManifestError,
    join_references,
    load_manifest,
    load_reference_file,
    save_manifest,
)
from confcorrect.types import FrameDistribution, Utterance, WordHypothesis
from confcorrect.validation import ValidationError

from conftest import build_synthetic_corpus, write_manifest_lines


def valid_record(utt_id="u1", **overrides):
    record = {
        "id": utt_id,
        "dataset": "SAP-shared",
        "reference": "how many refills",
        "words": [
            {"text": "How", "frames": [[0.7, 0.1, 0.1, 0.1]]},
            {"text": "many", "frames": [[0.25, 0.25, 0.25, 0.25], [1.0, 0.0, 0.0, 0.0]]},
        ],
    }
    record.update(overrides)
    return record


def test_loads_valid_records(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifest_lines(path, [valid_record("u1"), valid_record("u2")])
    utts = load_manifest(path)
    assert [u.id for u in utts] == ["u1", "u2"]
    assert utts[0].reference == ("HOW", "MANY", "REFILLS")
    assert utts[0].hypothesis_words == ["HOW", "MANY"]
    assert utts[0].hypothesis[1].frames[0].vocab_size == 4


def test_word_text_is_normalized(tmp_path):
    path = tmp_path / "m.jsonl"
    record = valid_record()
    record["words"][0]["text"] = "how?"
    write_manifest_lines(path, [record])
    assert load_manifest(path)[0].hypothesis_words[0] == "HOW"


def test_bad_probability_sum_names_utterance_and_frame(tmp_path):
    path = tmp_path / "m.jsonl"
    record = valid_record()
    record["words"][1]["frames"][1] = [0.4, 0.4, 0.0, 0.0]
    write_manifest_lines(path, [record])
    with pytest.raises(ManifestError, match=r"u1.*word 1.*frame 1"):
        load_manifest(path)


def test_negative_probability_rejected(tmp_path):
    path = tmp_path / "m.jsonl"
    record = valid_record()
    record["words"][0]["frames"][0] = [1.1, -0.1, 0.0, 0.0]
    write_manifest_lines(path, [record])
    with pytest.raises(ManifestError):
        load_manifest(path)


def test_boundary_noise_is_clipped():
    dist = FrameDistribution((1.0 + 5e-10, -5e-10, 0.0, 0.0))
    assert dist.probs == (1.0, 0.0, 0.0, 0.0)


def test_duplicate_id_rejected(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifest_lines(path, [valid_record("u1"), valid_record("u1")])
    with pytest.raises(ManifestError, match="duplicate utterance id 'u1'"):
        load_manifest(path)


def test_malformed_json_reports_line_number(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"id": "u1", "words": []}\nnot json\n', encoding="utf-8")
    with pytest.raises(ManifestError, match=":2:"):
        load_manifest(path)


def test_empty_word_list_allowed_empty_reference_allowed(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifest_lines(path, [{"id": "u1", "dataset": "d", "words": []}])
    utt = load_manifest(path)[0]
    assert utt.hypothesis == ()
    assert utt.reference == ()


def test_null_reference_and_dataset_do_not_leak_none(tmp_path):
    path = tmp_path / "m.jsonl"
    write_manifest_lines(path, [valid_record("u1", reference=None, dataset=None)])
    utt = load_manifest(path)[0]
    assert utt.reference == ()
    assert utt.dataset == "default"


def test_scored_fields_roundtrip(tmp_path):
    utt = Utterance(
        id="u1",
        hypothesis=(
            WordHypothesis("HI", (FrameDistribution((0.9, 0.1)),), word_confidence=0.75),
        ),
        reference=("HI",),
        sentence_confidence=0.75,
        dataset="d",
    )
    path = tmp_path / "scored.jsonl"
    save_manifest([utt], path)
    loaded = load_manifest(path)
    assert loaded == [utt]


def test_save_load_roundtrip_on_synthetic_corpus(tmp_path):
    corpus = build_synthetic_corpus(n=20, seed=3)
    path = tmp_path / "corpus.jsonl"
    assert save_manifest(corpus, path) == 20
    assert load_manifest(path) == corpus


def test_vocab_sizes_may_differ_across_utterances(tmp_path):
    path = tmp_path / "m.jsonl"
    a = valid_record("u1")
    b = valid_record("u2")
    b["words"] = [{"text": "yo", "frames": [[0.5, 0.5]]}]
    write_manifest_lines(path, [a, b])
    utts = load_manifest(path)
    assert utts[1].hypothesis[0].frames[0].vocab_size == 2


def test_vocab_sizes_must_agree_within_one_word(tmp_path):
    path = tmp_path / "m.jsonl"
    record = valid_record()
    record["words"][1]["frames"] = [[0.5, 0.5], [0.5, 0.25, 0.25]]
    write_manifest_lines(path, [record])
    with pytest.raises(ManifestError, match="mix vocabulary sizes"):
        load_manifest(path)


def test_single_entry_frame_rejected():
    with pytest.raises(ValidationError, match=">= 2"):
        FrameDistribution((1.0,))


def test_reference_file_and_join(tmp_path):
    refs_path = tmp_path / "refs.tsv"
    refs_path.write_text("u1\thow many refills\nu2\twhat's up\n", encoding="utf-8")
    refs = load_reference_file(refs_path)
    assert refs["u2"] == ("WHAT'S", "UP")

    manifest_path = tmp_path / "m.jsonl"
    write_manifest_lines(manifest_path, [valid_record("u1", reference=None) | {"reference": ""}])
    utts = load_manifest(manifest_path)
    joined = join_references(utts, refs)
    assert joined[0].reference == ("HOW", "MANY", "REFILLS")


def test_join_reports_missing_ids(tmp_path):
    manifest_path = tmp_path / "m.jsonl"
    write_manifest_lines(manifest_path, [valid_record("u9")])
    utts = load_manifest(manifest_path)
    with pytest.raises(ManifestError, match="u9"):
        join_references(utts, {"other": ("HI",)})


def test_reference_file_rejects_missing_tab(tmp_path):
    path = tmp_path / "refs.tsv"
    path.write_text("u1 no tab here\n", encoding="utf-8")
    with pytest.raises(ManifestError, match=":1:"):
        load_reference_file(path)
