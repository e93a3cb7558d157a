"""Correction-run evaluation: WER deltas, parameter sweeps, bucket analysis.

Every evaluated utterance gets a before/after WER and an outcome label:

* untouched - the (parsed) output equals the hypothesis after normalization
* help      - output differs and WER went down
* harm      - output differs and WER went up
* neutral   - output differs and WER is unchanged

"Attempted" means the normalized word sequences differ, so echoed casing or
punctuation never counts as a correction. Bucket analysis splits a dataset
at its mean sentence confidence (strictly below = low) and reports attempt,
help, and harm rates with per-bucket denominators.

Reports carry a provenance header (normalization, backend, templates,
conventions) and never embed timestamps, so hermetic runs are byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .alignment import edit_distance
from .backends import BackendConfig, BatchOutcome, PromptCache, correct_batch, make_backend, open_cache
from .confidence import score_utterance
from .normalize import DEFAULT_NORMALIZER, NormalizationConfig
from .strategy import FILTER_STRATEGIES, CorrectionDecision, StrategyConfig, decide, parse_correction_full
from .types import ConfidenceConfig, Utterance
from .validation import ValidationError

HELP = "help"
HARM = "harm"
NEUTRAL = "neutral"
UNTOUCHED = "untouched"

LOW = "low"
HIGH = "high"

#: Normative CSV column order for sweep and evaluation reports.
CSV_COLUMNS = (
    "dataset",
    "system",
    "alpha",
    "aggregation",
    "strategy",
    "threshold",
    "n_utts",
    "wer_before_pct",
    "wer_after_pct",
    "attempt_pct_low",
    "help_pct_low",
    "harm_pct_low",
    "attempt_pct_high",
    "help_pct_high",
    "harm_pct_high",
    "backend_failures",
    "empty_ref_excluded",
)

REPORT_FORMATS = ("csv", "markdown", "json")


@dataclass
class UtteranceResult:
    """Per-utterance evaluation outcome."""

    utterance_id: str
    dataset: str
    ref_len: int
    edits_before: int
    edits_after: int
    wer_before: float
    wer_after: float
    attempted: bool
    outcome: str
    sentence_confidence: Optional[float]
    bucket: Optional[str] = None
    failed: bool = False
    parse_salvaged: bool = False


@dataclass
class BucketStats:
    """Attempt/help/harm rates inside one confidence bucket (percent)."""

    bucket: str
    avg_conf: float
    attempt_pct: float
    help_pct: float
    harm_pct: float
    n: int


@dataclass
class EvaluationRun:
    """Results plus pooled corpus summary for one correction run."""

    results: list[UtteranceResult]
    wer_before: Optional[float]
    wer_after: Optional[float]
    empty_ref_excluded: int
    backend_failures: int
    attempts: int
    helps: int
    harms: int
    neutrals: int
    parse_salvaged: int


def evaluate_run(
    utterances: Sequence[Utterance],
    decisions: Mapping[str, CorrectionDecision],
    outcomes: Mapping[str, BatchOutcome],
    normalizer: NormalizationConfig = DEFAULT_NORMALIZER,
) -> EvaluationRun:
    """Score a correction run against references.

    Utterances without a reference are excluded and counted. Failed
    corrections fall back to the uncorrected hypothesis and are counted in
    ``backend_failures`` rather than silently mixed into the WER.
    """
    missing = [
        u.id
        for u in utterances
        if u.id in decisions and decisions[u.id].should_correct and u.id not in outcomes
    ]
    if missing:
        raise ValidationError(f"corrections missing for triggered utterances: {', '.join(sorted(missing))}")

    results: list[UtteranceResult] = []
    empty_ref = 0
    for utt in utterances:
        if utt.id not in decisions:
            raise ValidationError(f"no correction decision for utterance {utt.id!r}")
        if not utt.reference:
            empty_ref += 1
            continue
        reference = list(utt.reference)
        hypothesis = utt.hypothesis_words
        outcome = outcomes.get(utt.id)
        failed = bool(outcome is not None and outcome.failed)
        salvaged = False
        if outcome is not None and outcome.corrected and not failed:
            after, salvaged = parse_correction_full(outcome.raw_output or "", normalizer)
        else:
            after = hypothesis
        attempted = after != hypothesis
        edits_before = edit_distance(reference, hypothesis)
        edits_after = edit_distance(reference, after)
        if not attempted:
            label = UNTOUCHED
        elif edits_after < edits_before:
            label = HELP
        elif edits_after > edits_before:
            label = HARM
        else:
            label = NEUTRAL
        results.append(
            UtteranceResult(
                utterance_id=utt.id,
                dataset=utt.dataset,
                ref_len=len(reference),
                edits_before=edits_before,
                edits_after=edits_after,
                wer_before=edits_before / len(reference),
                wer_after=edits_after / len(reference),
                attempted=attempted,
                outcome=label,
                sentence_confidence=utt.sentence_confidence,
                failed=failed,
                parse_salvaged=salvaged,
            )
        )
    return EvaluationRun(
        results=results,
        wer_before=pooled_wer(results, after=False),
        wer_after=pooled_wer(results, after=True),
        empty_ref_excluded=empty_ref,
        backend_failures=sum(1 for r in results if r.failed),
        attempts=sum(1 for r in results if r.attempted),
        helps=sum(1 for r in results if r.outcome == HELP),
        harms=sum(1 for r in results if r.outcome == HARM),
        neutrals=sum(1 for r in results if r.outcome == NEUTRAL),
        parse_salvaged=sum(1 for r in results if r.parse_salvaged),
    )


def pooled_wer(results: Iterable[UtteranceResult], after: bool) -> Optional[float]:
    """Corpus WER pooled over utterances: total edits / total reference words."""
    edits = 0
    ref_words = 0
    for r in results:
        edits += r.edits_after if after else r.edits_before
        ref_words += r.ref_len
    if ref_words == 0:
        return None
    return edits / ref_words


def _bucket_stats(name: str, members: Sequence[UtteranceResult]) -> BucketStats:
    n = len(members)
    if n == 0:
        return BucketStats(bucket=name, avg_conf=0.0, attempt_pct=0.0, help_pct=0.0, harm_pct=0.0, n=0)
    return BucketStats(
        bucket=name,
        avg_conf=math.fsum(r.sentence_confidence for r in members) / n,
        attempt_pct=100.0 * sum(1 for r in members if r.attempted) / n,
        help_pct=100.0 * sum(1 for r in members if r.outcome == HELP) / n,
        harm_pct=100.0 * sum(1 for r in members if r.outcome == HARM) / n,
        n=n,
    )


def bucket_analysis(results: Sequence[UtteranceResult]) -> tuple[BucketStats, BucketStats]:
    """Split one dataset's results at its mean sentence confidence.

    Low bucket: strictly below the mean; ties go high. Labels each result's
    ``bucket`` field in place and returns (low, high) stats with per-bucket
    percentage denominators.
    """
    if not results:
        raise ValidationError("bucket analysis needs a non-empty result list")
    if any(r.sentence_confidence is None for r in results):
        raise ValidationError("bucket analysis needs sentence confidences on every result")
    mean_conf = math.fsum(r.sentence_confidence for r in results) / len(results)
    for r in results:
        r.bucket = LOW if r.sentence_confidence < mean_conf else HIGH
    low = [r for r in results if r.bucket == LOW]
    high = [r for r in results if r.bucket == HIGH]
    return _bucket_stats(LOW, low), _bucket_stats(HIGH, high)


@dataclass
class SweepGrid:
    """Axes of a sweep: confidence parameters x strategies x thresholds."""

    alphas: Sequence[float]
    aggregations: Sequence[str]
    strategies: Sequence[str]
    thresholds: Sequence[float] = ()

    def __post_init__(self) -> None:
        if not self.alphas or not self.aggregations or not self.strategies:
            raise ValidationError("sweep grid needs at least one alpha, aggregation, and strategy")
        if any(k in FILTER_STRATEGIES for k in self.strategies) and not self.thresholds:
            raise ValidationError("filter strategies in the grid require thresholds")


@dataclass
class SweepRow:
    """One grid point's outcome on one dataset."""

    dataset: str
    system: str
    alpha: Optional[float]
    aggregation: Optional[str]
    strategy: str
    threshold: Optional[float]
    n_utts: int
    wer_before: Optional[float]
    wer_after: Optional[float]
    low: BucketStats
    high: BucketStats
    backend_failures: int
    empty_ref_excluded: int
    results: list[UtteranceResult] = field(default_factory=list)


@dataclass
class SweepReport:
    """Sweep rows plus the provenance needed to reproduce them."""

    provenance: dict[str, str]
    rows: list[SweepRow]


def _rows_for_point(
    scored: Sequence[Utterance],
    run: EvaluationRun,
    *,
    system: str,
    alpha: Optional[float],
    aggregation: Optional[str],
    strategy: str,
    threshold: Optional[float],
) -> list[SweepRow]:
    datasets = sorted({u.dataset for u in scored})
    rows = []
    for dataset in datasets:
        ds_results = [r for r in run.results if r.dataset == dataset]
        if ds_results:
            low, high = bucket_analysis(ds_results)
        else:
            low, high = _bucket_stats(LOW, []), _bucket_stats(HIGH, [])
        rows.append(
            SweepRow(
                dataset=dataset,
                system=system,
                alpha=alpha,
                aggregation=aggregation,
                strategy=strategy,
                threshold=threshold,
                n_utts=len(ds_results),
                wer_before=pooled_wer(ds_results, after=False),
                wer_after=pooled_wer(ds_results, after=True),
                low=low,
                high=high,
                backend_failures=sum(1 for r in ds_results if r.failed),
                empty_ref_excluded=sum(1 for u in scored if u.dataset == dataset and not u.reference),
                results=ds_results,
            )
        )
    return rows


def build_provenance(
    normalizer: NormalizationConfig,
    backend_cfg: Optional[BackendConfig] = None,
    extra: Optional[Mapping[str, str]] = None,
) -> dict[str, str]:
    provenance = {
        "tool": "confcorrect 0.1.0",
        "normalization": normalizer.describe(),
        "conventions": "threshold=strict_below bucket_split=mean,ties_high bucket_denominator=per_bucket attempt=normalized_inequality failed=fallback_to_hypothesis",
    }
    if backend_cfg is not None:
        provenance["backend"] = backend_cfg.describe()
    if extra:
        provenance.update({str(k): str(v) for k, v in extra.items()})
    return provenance


def sweep(
    utterances: Sequence[Utterance],
    grid: SweepGrid,
    backend_cfg: BackendConfig,
    *,
    system: str = "unknown",
    measure: str = "tsallis",
    prompt_template: Optional[str] = None,
    confidence_decimals: int = 2,
    normalizer: NormalizationConfig = DEFAULT_NORMALIZER,
    extra_provenance: Optional[Mapping[str, str]] = None,
    backend=None,
) -> SweepReport:
    """Evaluate every grid point and return one report row per dataset.

    Confidence scores are recomputed per (alpha, aggregation); prompts that
    embed confidences are re-rendered accordingly. A shared prompt cache
    guarantees that identical prompts across grid points reach the corrector
    once. Backend errors are confined to their utterances, so a bad grid
    point never aborts the sweep. ``backend`` overrides the instance built
    from ``backend_cfg`` (useful for instrumented test doubles).
    """
    cache = open_cache(backend_cfg)
    if cache is None:
        cache = PromptCache()  # in-memory: still dedupes prompts across grid points
    if backend is None and backend_cfg.kind != "replay":
        backend = make_backend(backend_cfg)

    templates_used: dict[str, str] = {}
    rows: list[SweepRow] = []
    for alpha in grid.alphas:
        for aggregation in grid.aggregations:
            conf_cfg = ConfidenceConfig(measure=measure, alpha=alpha, aggregation=aggregation)
            scored = [score_utterance(u, conf_cfg) for u in utterances]
            for strategy_kind in grid.strategies:
                thresholds = grid.thresholds if strategy_kind in FILTER_STRATEGIES else (None,)
                for threshold in thresholds:
                    strat_cfg = StrategyConfig(
                        kind=strategy_kind,
                        threshold=threshold,
                        prompt_template=prompt_template,
                        confidence_decimals=confidence_decimals,
                    )
                    templates_used[strategy_kind] = strat_cfg.template_name
                    decisions = {u.id: decide(u, strat_cfg) for u in scored}
                    outcomes = correct_batch(
                        [(u, decisions[u.id]) for u in scored],
                        backend_cfg,
                        backend=backend,
                        cache=cache,
                    )
                    run = evaluate_run(scored, decisions, outcomes, normalizer=normalizer)
                    rows.extend(
                        _rows_for_point(
                            scored,
                            run,
                            system=system,
                            alpha=alpha,
                            aggregation=aggregation,
                            strategy=strategy_kind,
                            threshold=threshold,
                        )
                    )
    extra = {"templates": " ".join(f"{k}={v}" for k, v in sorted(templates_used.items()))}
    if extra_provenance:
        extra.update(extra_provenance)
    provenance = build_provenance(normalizer, backend_cfg, extra)
    return SweepReport(provenance=provenance, rows=rows)


def _fmt_pct(value: Optional[float]) -> str:
    return "" if value is None else f"{100.0 * value:.2f}"


def _fmt_opt(value) -> str:
    return "" if value is None else str(value)


def _csv_record(row: SweepRow) -> list[str]:
    return [
        row.dataset,
        row.system,
        _fmt_opt(row.alpha),
        _fmt_opt(row.aggregation),
        row.strategy,
        _fmt_opt(row.threshold),
        str(row.n_utts),
        _fmt_pct(row.wer_before),
        _fmt_pct(row.wer_after),
        f"{row.low.attempt_pct:.2f}",
        f"{row.low.help_pct:.2f}",
        f"{row.low.harm_pct:.2f}",
        f"{row.high.attempt_pct:.2f}",
        f"{row.high.help_pct:.2f}",
        f"{row.high.harm_pct:.2f}",
        str(row.backend_failures),
        str(row.empty_ref_excluded),
    ]


def render_csv(report: SweepReport) -> str:
    buffer = io.StringIO()
    for key, value in report.provenance.items():
        buffer.write(f"# {key}: {value}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow(_csv_record(row))
    return buffer.getvalue()


def render_markdown(report: SweepReport) -> str:
    """Tables grouped per (system, strategy, threshold), one line per
    (dataset, alpha), with corrected WER under each aggregation column.
    The dataset cell carries the uncorrected WER in parentheses."""
    lines = [f"# {key}: {value}" for key, value in report.provenance.items()]
    lines.append("")
    groups: dict[tuple, list[SweepRow]] = {}
    for row in report.rows:
        groups.setdefault((row.system, row.strategy, row.threshold), []).append(row)
    for (system, strategy, threshold), rows in groups.items():
        title = f"## {system} / {strategy}"
        if threshold is not None:
            title += f" (threshold {threshold})"
        lines.append(title)
        lines.append("")
        aggregations = list(dict.fromkeys(r.aggregation for r in rows))
        header = ["Dataset (ASR WER %)", "Alpha"] + [str(a) for a in aggregations]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "|".join(" --- " for _ in header) + "|")
        cells: dict[tuple, dict] = {}
        for r in rows:
            cells.setdefault((r.dataset, r.alpha), {})[r.aggregation] = r
        for (dataset, alpha), per_agg in cells.items():
            any_row = next(iter(per_agg.values()))
            label = f"{dataset} ({_fmt_pct(any_row.wer_before)})"
            values = [_fmt_pct(per_agg[a].wer_after) if a in per_agg else "" for a in aggregations]
            lines.append("| " + " | ".join([label, _fmt_opt(alpha)] + values) + " |")
        lines.append("")
    return "\n".join(lines)


def render_json(report: SweepReport) -> str:
    payload = {
        "provenance": report.provenance,
        "rows": [asdict(row) for row in report.rows],
    }
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def load_report_json(path: str | Path) -> SweepReport:
    """Inverse of the json format; reconstructs the full report."""
    with Path(path).open("r", encoding="utf-8") as handle:
        payload = json.load(handle)
    rows = []
    for raw in payload["rows"]:
        raw = dict(raw)
        raw["low"] = BucketStats(**raw["low"])
        raw["high"] = BucketStats(**raw["high"])
        raw["results"] = [UtteranceResult(**r) for r in raw["results"]]
        rows.append(SweepRow(**raw))
    return SweepReport(provenance=dict(payload["provenance"]), rows=rows)


def emit_report(report: SweepReport, format: str, out: str | Path) -> Path:
    """Write the report in one of csv, markdown, json."""
    if format not in REPORT_FORMATS:
        raise ValidationError(f"unknown report format {format!r}; expected one of {REPORT_FORMATS}")
    out = Path(out)
    if format == "csv":
        text = render_csv(report)
    elif format == "markdown":
        text = render_markdown(report)
    else:
        text = render_json(report)
    out.write_text(text, encoding="utf-8")
    return out
