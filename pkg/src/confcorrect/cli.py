"""Command-line pipeline: score -> correct -> evaluate / sweep / analyze / prepare.

Stages communicate through files so expensive correction runs can be cached,
resumed, and replayed hermetically. Exit codes: 0 success, 1 runtime
failure, 2 usage or validation error.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path
from typing import Optional

import click
import yaml

from .alignment import align, format_alignment
from .backends import (
    BACKEND_KINDS,
    ENDPOINT_ENV,
    BackendConfig,
    BatchOutcome,
    correct_batch,
    prompt_hash,
)
from .confidence import score_utterance
from .evaluation import (
    REPORT_FORMATS,
    SweepGrid,
    SweepReport,
    _rows_for_point,
    build_provenance,
    emit_report,
    evaluate_run,
    sweep,
)
from .manifest import load_manifest, load_reference_file, join_references, save_manifest
from .normalize import NormalizationConfig
from .strategy import (
    STRATEGIES,
    CorrectionDecision,
    StrategyConfig,
    TemplateError,
    decide,
    parse_correction_full,
)
from .types import AGGREGATIONS, CONFIDENCE_MEASURES, ConfidenceConfig
from .validation import ConfCorrectError, ValidationError

FORMATS_HELP = """\
File formats
------------

Hypothesis manifest (line-delimited JSON, one utterance per line):
  id                  string, unique within the manifest
  dataset             string tag
  reference           string, optional raw transcript
  words               array of {"text": str, "frames": [[float, ...], ...]}
  word_confidence     per word, added by `score`
  sentence_confidence per utterance, added by `score`

Reference file (tab-separated): id<TAB>transcript

Corrections file (line-delimited JSON, written by `correct`):
  id, dataset, strategy, threshold, should_correct, trigger, prompt,
  prompt_hash, backend, model, raw_output, parsed, parse_salvaged,
  failed, error

Training pairs (line-delimited JSON, written by `prepare`): prompt, completion

Alignment dump (written by `analyze`): id<TAB>op:ref→hyp tokens, ops are
match/substitute/delete/insert, `*` marks the absent side.

Report CSV columns: dataset, system, alpha, aggregation, strategy,
threshold, n_utts, wer_before_pct, wer_after_pct, attempt_pct_low,
help_pct_low, harm_pct_low, attempt_pct_high, help_pct_high,
harm_pct_high, backend_failures, empty_ref_excluded.

Prompt templates use the placeholders {{WORDS}} and {{WORDS_WITH_CONF}}.

Environment: CONFCORRECT_API_KEY (bearer token), CONFCORRECT_ENDPOINT
(http backend endpoint; a --endpoint flag takes precedence).

Config file (YAML) sections: confidence, strategy, backend, normalizer.
Precedence: command-line flag > environment > config file.
"""


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, TemplateError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except ConfCorrectError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _read_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle) or {}
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must contain a mapping")
    return data


def _section(config: dict, name: str) -> dict:
    section = config.get(name, {})
    if not isinstance(section, dict):
        raise ValidationError(f"config section {name!r} must be a mapping")
    return section


def _resolve_normalizer(config: dict, spec: Optional[str]) -> NormalizationConfig:
    values = dict(_section(config, "normalizer"))
    if spec:
        path = Path(spec)
        if path.is_file():
            override = yaml.safe_load(path.read_text("utf-8")) or {}
        else:
            try:
                override = json.loads(spec)
            except json.JSONDecodeError:
                raise ValidationError(
                    f"--normalizer must be a JSON object or a YAML file path, got {spec!r}"
                ) from None
        if not isinstance(override, dict):
            raise ValidationError("--normalizer must describe a mapping")
        values.update(override)
    try:
        return NormalizationConfig(**values)
    except TypeError as exc:
        raise ValidationError(f"invalid normalizer settings: {exc}") from None


def _pick(flag, config_value, default):
    if flag is not None:
        return flag
    if config_value is not None:
        return config_value
    return default


def _resolve_confidence(config: dict, measure, alpha, aggregation) -> ConfidenceConfig:
    section = _section(config, "confidence")
    return ConfidenceConfig(
        measure=_pick(measure, section.get("measure"), "tsallis"),
        alpha=float(_pick(alpha, section.get("alpha"), 0.9)),
        aggregation=_pick(aggregation, section.get("aggregation"), "product"),
        alpha_gibbs_switch_epsilon=float(section.get("alpha_gibbs_switch_epsilon", 1e-6)),
    )


def _resolve_strategy(config: dict, kind, threshold, template, decimals) -> StrategyConfig:
    section = _section(config, "strategy")
    kind = _pick(kind, section.get("kind"), "confidence_prompt")
    threshold = _pick(threshold, section.get("threshold"), None)
    return StrategyConfig(
        kind=kind,
        threshold=None if threshold is None else float(threshold),
        prompt_template=_pick(template, section.get("prompt_template"), None),
        confidence_decimals=int(_pick(decimals, section.get("confidence_decimals"), 2)),
    )


def _resolve_backend(config: dict, kind, endpoint, model, timeout, max_retries,
                     concurrency, cache_path, script_path) -> BackendConfig:
    section = _section(config, "backend")
    script = None
    script_path = _pick(script_path, section.get("script"), None)
    if script_path:
        with open(script_path, "r", encoding="utf-8") as handle:
            script = json.load(handle)
    # flag > environment > config file
    resolved_endpoint = endpoint or os.environ.get(ENDPOINT_ENV) or section.get("endpoint")
    return BackendConfig(
        kind=_pick(kind, section.get("kind"), "mock_identity"),
        endpoint=resolved_endpoint,
        model_name=_pick(model, section.get("model_name"), "corrector"),
        timeout=float(_pick(timeout, section.get("timeout"), 60.0)),
        max_retries=int(_pick(max_retries, section.get("max_retries"), 2)),
        concurrency_limit=int(_pick(concurrency, section.get("concurrency_limit"), 1)),
        cache_path=_pick(cache_path, section.get("cache_path"), None),
        script=script,
    )


def _resolve_out(ctx, out: Optional[str]) -> Path:
    resolved = out or ctx.obj.get("out")
    if not resolved:
        raise click.UsageError("an output path is required (--out)")
    return Path(resolved)


def _base_provenance(ctx, normalizer: NormalizationConfig, backend_cfg=None, extra=None) -> dict:
    merged = dict(extra or {})
    if ctx.obj.get("seed") is not None:
        merged["seed"] = str(ctx.obj["seed"])
    if ctx.obj.get("config_path"):
        merged["config_file"] = str(ctx.obj["config_path"])
    return build_provenance(normalizer, backend_cfg, merged)


@click.group(epilog=FORMATS_HELP)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML config file with confidence/strategy/backend/normalizer sections.")
@click.option("--normalizer", "normalizer_spec", default=None,
              help="Normalizer override: inline JSON object or YAML file path.")
@click.option("--seed", type=int, default=None,
              help="Recorded in report provenance; does not affect computation.")
@click.option("--out", "out_path", default=None, help="Default output path for subcommands.")
@click.pass_context
def main(ctx, config_path, normalizer_spec, seed, out_path):
    """Entropy-based ASR confidence scoring and confidence-guided correction."""
    ctx.ensure_object(dict)
    try:
        config = _read_config_file(config_path)
        ctx.obj["config"] = config
        ctx.obj["normalizer"] = _resolve_normalizer(config, normalizer_spec)
    except ValidationError as exc:
        raise click.UsageError(str(exc)) from None
    ctx.obj["seed"] = seed
    ctx.obj["out"] = out_path
    ctx.obj["config_path"] = config_path


@main.command("score")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--refs", "refs_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Optional id<TAB>transcript file joined onto the manifest.")
@click.option("--measure", type=click.Choice(CONFIDENCE_MEASURES), default=None)
@click.option("--alpha", type=float, default=None, help="Tsallis entropic index in (0, 1].")
@click.option("--agg", "aggregation", type=click.Choice(AGGREGATIONS), default=None)
@click.option("--out", "out", default=None)
@click.pass_context
@handle_errors
def cmd_score(ctx, manifest_path, refs_path, measure, alpha, aggregation, out):
    """Fill word and sentence confidences on a hypothesis manifest."""
    out = _resolve_out(ctx, out)
    normalizer = ctx.obj["normalizer"]
    conf_cfg = _resolve_confidence(ctx.obj["config"], measure, alpha, aggregation)
    utterances = load_manifest(manifest_path, normalizer)
    if refs_path:
        utterances = join_references(utterances, load_reference_file(refs_path, normalizer))
    scored = [score_utterance(u, conf_cfg) for u in utterances]
    count = save_manifest(scored, out)
    click.echo(f"scored {count} utterances ({conf_cfg.describe()}) -> {out}")


def _write_corrections(out: Path, utterances, decisions, outcomes, strat_cfg, backend_cfg, normalizer) -> None:
    with out.open("w", encoding="utf-8") as handle:
        for utt in utterances:
            decision = decisions[utt.id]
            outcome = outcomes[utt.id]
            if outcome.failed:
                parsed, salvaged = None, False
            else:
                parsed, salvaged = parse_correction_full(outcome.raw_output or "", normalizer)
            record = {
                "id": utt.id,
                "dataset": utt.dataset,
                "strategy": strat_cfg.kind,
                "threshold": strat_cfg.threshold,
                "should_correct": decision.should_correct,
                "trigger": decision.trigger,
                "prompt": decision.prompt,
                "prompt_hash": None if decision.prompt is None else prompt_hash(decision.prompt, backend_cfg.model_name),
                "backend": backend_cfg.kind,
                "model": backend_cfg.model_name,
                "raw_output": outcome.raw_output,
                "parsed": parsed,
                "parse_salvaged": salvaged,
                "failed": outcome.failed,
                "error": outcome.error,
            }
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")


@main.command("correct")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Scored manifest (run `score` first).")
@click.option("--strategy", "strategy_kind", type=click.Choice(STRATEGIES), default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--template", default=None, help="Builtin template name or file path.")
@click.option("--decimals", type=int, default=None, help="Decimals for bracketed confidences.")
@click.option("--backend", "backend_kind", type=click.Choice(BACKEND_KINDS), default=None)
@click.option("--endpoint", default=None, help=f"Chat-completions endpoint (or ${ENDPOINT_ENV}).")
@click.option("--model", default=None)
@click.option("--timeout", type=float, default=None)
@click.option("--max-retries", type=int, default=None)
@click.option("--concurrency", type=int, default=None)
@click.option("--cache", "cache_path", default=None, help="Prompt cache file (records live runs, feeds replay).")
@click.option("--script", "script_path", default=None, help="JSON mapping for the mock_scripted backend.")
@click.option("--out", default=None)
@click.pass_context
@handle_errors
def cmd_correct(ctx, manifest_path, strategy_kind, threshold, template, decimals, backend_kind,
                endpoint, model, timeout, max_retries, concurrency, cache_path, script_path, out):
    """Decide which utterances to correct and run the corrector backend."""
    out = _resolve_out(ctx, out)
    normalizer = ctx.obj["normalizer"]
    strat_cfg = _resolve_strategy(ctx.obj["config"], strategy_kind, threshold, template, decimals)
    backend_cfg = _resolve_backend(ctx.obj["config"], backend_kind, endpoint, model, timeout,
                                   max_retries, concurrency, cache_path, script_path)
    utterances = load_manifest(manifest_path, normalizer)
    decisions = {u.id: decide(u, strat_cfg) for u in utterances}
    outcomes = correct_batch([(u, decisions[u.id]) for u in utterances], backend_cfg)
    _write_corrections(out, utterances, decisions, outcomes, strat_cfg, backend_cfg, normalizer)
    triggered = sum(1 for d in decisions.values() if d.should_correct)
    failed = sum(1 for o in outcomes.values() if o.failed)
    click.echo(f"corrected {triggered}/{len(utterances)} utterances, {failed} failures -> {out}")
    if failed:
        for o in outcomes.values():
            if o.failed:
                click.echo(f"failed: {o.utterance_id}: {o.error}", err=True)
        if triggered and failed == triggered:
            sys.exit(1)


def _load_corrections(path: str | Path) -> tuple[dict[str, CorrectionDecision], dict[str, BatchOutcome], dict]:
    decisions: dict[str, CorrectionDecision] = {}
    outcomes: dict[str, BatchOutcome] = {}
    meta: dict = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            utt_id = record["id"]
            if utt_id in decisions:
                raise ValidationError(f"{path}:{lineno}: duplicate correction for id {utt_id!r}")
            decisions[utt_id] = CorrectionDecision(
                should_correct=record["should_correct"],
                trigger=record["trigger"],
                prompt=record.get("prompt"),
            )
            outcomes[utt_id] = BatchOutcome(
                utterance_id=utt_id,
                raw_output=record.get("raw_output"),
                corrected=record["should_correct"],
                failed=bool(record.get("failed")),
                error=record.get("error"),
            )
            meta.setdefault("strategy", record.get("strategy"))
            meta.setdefault("threshold", record.get("threshold"))
            meta.setdefault("backend", record.get("backend"))
            meta.setdefault("model", record.get("model"))
    return decisions, outcomes, meta


def _check_id_join(manifest_ids: set[str], correction_ids: set[str]) -> None:
    only_manifest = sorted(manifest_ids - correction_ids)
    only_corrections = sorted(correction_ids - manifest_ids)
    if only_manifest or only_corrections:
        parts = []
        if only_manifest:
            parts.append(f"manifest-only ids: {', '.join(only_manifest)}")
        if only_corrections:
            parts.append(f"corrections-only ids: {', '.join(only_corrections)}")
        raise ValidationError("manifest and corrections do not join; " + "; ".join(parts))


@main.command("evaluate")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corrections", "corrections_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--refs", "refs_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--system", default="unknown", help="ASR system label for report rows.")
@click.option("--alpha", type=float, default=None, help="Label only: alpha used when scoring.")
@click.option("--agg", "aggregation", type=click.Choice(AGGREGATIONS), default=None,
              help="Label only: aggregation used when scoring.")
@click.option("--format", "format_", type=click.Choice(REPORT_FORMATS), default="csv")
@click.option("--out", default=None)
@click.pass_context
@handle_errors
def cmd_evaluate(ctx, manifest_path, corrections_path, refs_path, system, alpha, aggregation, format_, out):
    """Compute WER before/after correction plus bucket statistics."""
    out = _resolve_out(ctx, out)
    normalizer = ctx.obj["normalizer"]
    utterances = load_manifest(manifest_path, normalizer)
    if refs_path:
        utterances = join_references(utterances, load_reference_file(refs_path, normalizer))
    decisions, outcomes, meta = _load_corrections(corrections_path)
    _check_id_join({u.id for u in utterances}, set(decisions))
    run = evaluate_run(utterances, decisions, outcomes, normalizer=normalizer)
    rows = _rows_for_point(
        utterances,
        run,
        system=system,
        alpha=alpha,
        aggregation=aggregation,
        strategy=meta.get("strategy") or "unknown",
        threshold=meta.get("threshold"),
    )
    extra = {"corrections_file": str(corrections_path), "corrector": f"{meta.get('backend')}:{meta.get('model')}"}
    report = SweepReport(provenance=_base_provenance(ctx, normalizer, extra=extra), rows=rows)
    emit_report(report, format_, out)
    before = "-" if run.wer_before is None else f"{100 * run.wer_before:.2f}"
    after = "-" if run.wer_after is None else f"{100 * run.wer_after:.2f}"
    click.echo(
        f"evaluated {len(run.results)} utterances: WER {before}% -> {after}% "
        f"(attempts {run.attempts}, help {run.helps}, harm {run.harms}, neutral {run.neutrals}, "
        f"failures {run.backend_failures}, empty-ref excluded {run.empty_ref_excluded}) -> {out}"
    )


@main.command("sweep")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--refs", "refs_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--alphas", default="0.9,0.7,0.5,0.3", help="Comma-separated Tsallis indices.")
@click.option("--aggs", "aggregations", default="product,mean,min", help="Comma-separated aggregations.")
@click.option("--strategies", default="confidence_prompt", help="Comma-separated strategy kinds.")
@click.option("--thresholds", default="", help="Comma-separated thresholds for filter strategies.")
@click.option("--measure", type=click.Choice(CONFIDENCE_MEASURES), default="tsallis")
@click.option("--system", default="unknown")
@click.option("--template", default=None)
@click.option("--decimals", type=int, default=2)
@click.option("--backend", "backend_kind", type=click.Choice(BACKEND_KINDS), default=None)
@click.option("--endpoint", default=None)
@click.option("--model", default=None)
@click.option("--timeout", type=float, default=None)
@click.option("--max-retries", type=int, default=None)
@click.option("--concurrency", type=int, default=None)
@click.option("--cache", "cache_path", default=None)
@click.option("--script", "script_path", default=None)
@click.option("--format", "format_", type=click.Choice(REPORT_FORMATS), default="csv")
@click.option("--out", default=None)
@click.pass_context
@handle_errors
def cmd_sweep(ctx, manifest_path, refs_path, alphas, aggregations, strategies, thresholds, measure,
              system, template, decimals, backend_kind, endpoint, model, timeout, max_retries,
              concurrency, cache_path, script_path, format_, out):
    """Evaluate an alpha x aggregation x strategy x threshold grid."""
    out = _resolve_out(ctx, out)
    normalizer = ctx.obj["normalizer"]
    backend_cfg = _resolve_backend(ctx.obj["config"], backend_kind, endpoint, model, timeout,
                                   max_retries, concurrency, cache_path, script_path)
    utterances = load_manifest(manifest_path, normalizer)
    if refs_path:
        utterances = join_references(utterances, load_reference_file(refs_path, normalizer))
    grid = SweepGrid(
        alphas=[float(v) for v in alphas.split(",") if v.strip()],
        aggregations=[v.strip() for v in aggregations.split(",") if v.strip()],
        strategies=[v.strip() for v in strategies.split(",") if v.strip()],
        thresholds=[float(v) for v in thresholds.split(",") if v.strip()],
    )
    extra = {}
    if ctx.obj.get("seed") is not None:
        extra["seed"] = str(ctx.obj["seed"])
    if ctx.obj.get("config_path"):
        extra["config_file"] = str(ctx.obj["config_path"])
    report = sweep(
        utterances,
        grid,
        backend_cfg,
        system=system,
        measure=measure,
        prompt_template=template,
        confidence_decimals=decimals,
        normalizer=normalizer,
        extra_provenance=extra,
    )
    emit_report(report, format_, out)
    click.echo(f"swept {len(report.rows)} rows -> {out}")


@main.command("analyze")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corrections", "corrections_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Align parsed corrections instead of the raw hypothesis.")
@click.option("--refs", "refs_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", default=None)
@click.pass_context
@handle_errors
def cmd_analyze(ctx, manifest_path, corrections_path, refs_path, out):
    """Dump per-utterance reference alignments (id<TAB>op:ref→hyp ...)."""
    out = _resolve_out(ctx, out)
    normalizer = ctx.obj["normalizer"]
    utterances = load_manifest(manifest_path, normalizer)
    if refs_path:
        utterances = join_references(utterances, load_reference_file(refs_path, normalizer))
    corrections: dict[str, list[str]] = {}
    if corrections_path:
        decisions, outcomes, _ = _load_corrections(corrections_path)
        _check_id_join({u.id for u in utterances}, set(decisions))
        for utt in utterances:
            outcome = outcomes[utt.id]
            if outcome.corrected and not outcome.failed:
                corrections[utt.id] = parse_correction_full(outcome.raw_output or "", normalizer)[0]
            else:
                corrections[utt.id] = utt.hypothesis_words
    skipped = 0
    with out.open("w", encoding="utf-8") as handle:
        handle.write(f"# normalization: {normalizer.describe()}\n")
        handle.write(f"# target: {'corrections' if corrections_path else 'hypothesis'}\n")
        for utt in utterances:
            if not utt.reference:
                skipped += 1
                continue
            target = corrections.get(utt.id, utt.hypothesis_words)
            alignment = align(list(utt.reference), target)
            handle.write(f"{utt.id}\t{format_alignment(alignment)}\n")
    click.echo(f"dumped {len(utterances) - skipped} alignments ({skipped} empty-reference skipped) -> {out}")


@main.command("prepare")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Scored manifest with references.")
@click.option("--refs", "refs_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--strategy", "strategy_kind", type=click.Choice(STRATEGIES), default=None)
@click.option("--template", default=None)
@click.option("--decimals", type=int, default=None)
@click.option("--out", default=None)
@click.pass_context
@handle_errors
def cmd_prepare(ctx, manifest_path, refs_path, strategy_kind, template, decimals, out):
    """Export prompt/completion training pairs for corrector fine-tuning."""
    from .strategy import export_training_pairs

    out = _resolve_out(ctx, out)
    normalizer = ctx.obj["normalizer"]
    strat_cfg = _resolve_strategy(ctx.obj["config"], strategy_kind, None, template, decimals)
    utterances = load_manifest(manifest_path, normalizer)
    if refs_path:
        utterances = join_references(utterances, load_reference_file(refs_path, normalizer))
    count = export_training_pairs(utterances, strat_cfg, out)
    click.echo(f"wrote {count} training pairs -> {out}")


if __name__ == "__main__":
    main()
