"""Corrector backends: HTTP chat-completions client, mocks, and replay cache.

The wire protocol is OpenAI-compatible chat completions: one user message
per prompt, temperature 0 and a fixed seed for reproducible decoding. Every
result can be cached in an append-only line-delimited file keyed by a hash
of the exact prompt bytes plus the model name, and a ``replay`` backend
serves exclusively from such a cache so evaluations stay hermetic.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Optional, Sequence

import requests

from .strategy import (
    CORRECTION_MARKER,
    EMPTY_HYPOTHESIS_TOKEN,
    CorrectionDecision,
    strip_confidence_annotations,
)
from .types import Utterance
from .validation import ConfCorrectError, ValidationError, check_choice

logger = logging.getLogger(__name__)

BACKEND_KINDS = ("http", "mock_identity", "mock_scripted", "replay")

API_KEY_ENV = "CONFCORRECT_API_KEY"
ENDPOINT_ENV = "CONFCORRECT_ENDPOINT"


class BackendError(ConfCorrectError):
    """A correction request failed after exhausting retries."""


class ReplayMissError(BackendError):
    """Replay cache does not contain the requested prompt."""


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock_identity"
    endpoint: Optional[str] = None
    model_name: str = "corrector"
    timeout: float = 60.0
    max_retries: int = 2
    retry_base_delay: float = 0.5
    concurrency_limit: int = 1
    cache_path: Optional[str] = None
    script: Optional[Mapping[str, str]] = None

    def __post_init__(self) -> None:
        check_choice(self.kind, BACKEND_KINDS, "backend kind")
        if self.timeout <= 0:
            raise ValidationError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")
        if self.concurrency_limit < 1:
            raise ValidationError("concurrency_limit must be >= 1")
        if self.kind == "replay" and not self.cache_path:
            raise ValidationError("replay backend requires cache_path")

    def resolved_endpoint(self) -> str:
        endpoint = self.endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ValidationError("http backend requires an endpoint (flag, config, or CONFCORRECT_ENDPOINT)")
        return endpoint.rstrip("/")

    def describe(self) -> str:
        parts = [f"kind={self.kind}", f"model={self.model_name}"]
        if self.kind == "http":
            parts.append("decoding=temperature:0,seed:0")
        if self.cache_path:
            parts.append(f"cache={self.cache_path}")
        return " ".join(parts)


@dataclass(frozen=True)
class CorrectionRecord:
    prompt_hash: str
    raw_output: str
    latency: float
    backend: str
    timestamp: str
    model: str = ""


def prompt_hash(prompt: str, model_name: str) -> str:
    """Content hash over the exact prompt bytes plus the model name."""
    digest = hashlib.sha256()
    digest.update(model_name.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(prompt.encode("utf-8"))
    return digest.hexdigest()


class PromptCache:
    """Hash-keyed correction cache; concurrent reads, serialized writes.

    Backed by an append-only JSONL file when ``path`` is given, or purely
    in-memory otherwise (useful for deduplicating prompts inside one run).
    """

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path else None
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            with self.path.open("r", encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    self._entries[record["prompt_hash"]] = record["raw_output"]

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[str]:
        return self._entries.get(key)

    def put(self, record: CorrectionRecord) -> None:
        with self._lock:
            self._entries[record.prompt_hash] = record.raw_output
            if self.path:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record.__dict__, ensure_ascii=False))
                    handle.write("\n")


def extract_question_words(prompt: str) -> str:
    """The hypothesis text a rendered prompt asks about.

    Takes the last non-empty line before the final ``Correction:`` marker,
    strips bracketed confidence annotations, and maps the empty-hypothesis
    placeholder to an empty string. Used by the mock backends.
    """
    lines = prompt.splitlines()
    end = len(lines)
    for idx in range(len(lines) - 1, -1, -1):
        if lines[idx].strip() == CORRECTION_MARKER:
            end = idx
            break
    for idx in range(end - 1, -1, -1):
        if lines[idx].strip():
            cleaned = " ".join(strip_confidence_annotations(lines[idx]).split())
            return "" if cleaned == EMPTY_HYPOTHESIS_TOKEN else cleaned
    return ""


class IdentityBackend:
    """Echoes the hypothesis unchanged; the do-nothing corrector."""

    name = "mock_identity"

    def complete(self, prompt: str) -> str:
        return extract_question_words(prompt)


class ScriptedBackend:
    """Maps extracted hypothesis text to canned outputs; identity on misses."""

    name = "mock_scripted"

    def __init__(self, script: Mapping[str, str]):
        self.script = dict(script)

    def complete(self, prompt: str) -> str:
        text = extract_question_words(prompt)
        return self.script.get(text, text)


class HttpBackend:
    """OpenAI-compatible chat-completions client with backoff retries."""

    name = "http"

    def __init__(self, cfg: BackendConfig):
        self.cfg = cfg
        self.url = cfg.resolved_endpoint() + "/chat/completions"

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
            "seed": 0,
        }
        last_error: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            try:
                response = requests.post(
                    self.url, json=payload, headers=self._headers(), timeout=self.cfg.timeout
                )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_error = exc
            else:
                if response.status_code >= 500:
                    last_error = BackendError(f"server error {response.status_code}")
                elif response.status_code != 200:
                    raise BackendError(f"request failed with status {response.status_code}: {response.text[:200]}")
                else:
                    return self._extract(response)
            if attempt < self.cfg.max_retries:
                delay = self.cfg.retry_base_delay * (2**attempt)
                logger.warning("retrying after %s (attempt %d/%d, delay %.1fs)",
                               last_error, attempt + 1, self.cfg.max_retries, delay)
                time.sleep(delay)
        raise BackendError(f"request failed after {self.cfg.max_retries + 1} attempts: {last_error}")

    @staticmethod
    def _extract(response: requests.Response) -> str:
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed response body: {exc}") from exc
        if not isinstance(content, str):
            raise BackendError("malformed response body: message content is not a string")
        return content


def make_backend(cfg: BackendConfig):
    """Instantiate the live backend for a config (replay has no live side)."""
    if cfg.kind == "http":
        return HttpBackend(cfg)
    if cfg.kind == "mock_identity":
        return IdentityBackend()
    if cfg.kind == "mock_scripted":
        return ScriptedBackend(cfg.script or {})
    raise ValidationError("replay backend serves from cache only; nothing to instantiate")


def open_cache(cfg: BackendConfig) -> Optional[PromptCache]:
    return PromptCache(cfg.cache_path) if cfg.cache_path else None


def correct(
    prompt: str,
    cfg: BackendConfig,
    backend=None,
    cache: Optional[PromptCache] = None,
) -> str:
    """Turn one rendered prompt into raw corrector output.

    Cache hits never touch the backend. The replay kind is cache-only and
    raises ``ReplayMissError`` on unknown prompts so replays stay hermetic.
    """
    key = prompt_hash(prompt, cfg.model_name)
    if cache is None:
        cache = open_cache(cfg)
    if cfg.kind == "replay":
        if cache is None:
            raise ValidationError("replay backend requires cache_path")
        hit = cache.get(key)
        if hit is None:
            raise ReplayMissError(f"prompt hash {key} not in replay cache {cfg.cache_path}")
        return hit
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    if backend is None:
        backend = make_backend(cfg)
    started = time.monotonic()
    raw = backend.complete(prompt)
    if cache is not None:
        cache.put(
            CorrectionRecord(
                prompt_hash=key,
                raw_output=raw,
                latency=time.monotonic() - started,
                backend=backend.name,
                timestamp=datetime.now(timezone.utc).isoformat(),
                model=cfg.model_name,
            )
        )
    return raw


@dataclass
class BatchOutcome:
    """Per-utterance result of a correction batch."""

    utterance_id: str
    raw_output: Optional[str]
    corrected: bool
    failed: bool = False
    error: Optional[str] = None


def correct_batch(
    decisions: Sequence[tuple[Utterance, CorrectionDecision]],
    cfg: BackendConfig,
    backend=None,
    cache: Optional[PromptCache] = None,
) -> dict[str, BatchOutcome]:
    """Run corrections for a batch of strategy decisions.

    Untriggered utterances pass through with their original hypothesis text
    and zero backend calls. Identical prompts are deduplicated before
    dispatch, at most ``concurrency_limit`` requests run at once, and one
    failed utterance never aborts the batch: it is marked failed and counted
    separately downstream. Results are keyed by utterance id, so output is
    independent of completion order.
    """
    if cache is None:
        cache = open_cache(cfg)
    if backend is None and cfg.kind != "replay":
        backend = make_backend(cfg)

    unique_prompts: dict[str, str] = {}
    for utterance, decision in decisions:
        if decision.should_correct:
            if decision.prompt is None:
                raise ValidationError(f"utterance {utterance.id!r}: triggered decision has no prompt")
            unique_prompts.setdefault(prompt_hash(decision.prompt, cfg.model_name), decision.prompt)

    results: dict[str, str | Exception] = {}

    def run_one(key: str, prompt: str) -> None:
        try:
            results[key] = correct(prompt, cfg, backend=backend, cache=cache)
        except Exception as exc:  # per-utterance isolation
            results[key] = exc

    if unique_prompts:
        with ThreadPoolExecutor(max_workers=cfg.concurrency_limit) as pool:
            futures = [pool.submit(run_one, key, prompt) for key, prompt in unique_prompts.items()]
            for future in futures:
                future.result()

    outcomes: dict[str, BatchOutcome] = {}
    for utterance, decision in decisions:
        if not decision.should_correct:
            outcomes[utterance.id] = BatchOutcome(
                utterance_id=utterance.id,
                raw_output=" ".join(utterance.hypothesis_words),
                corrected=False,
            )
            continue
        outcome = results[prompt_hash(decision.prompt, cfg.model_name)]
        if isinstance(outcome, Exception):
            logger.warning("correction failed for %s: %s", utterance.id, outcome)
            outcomes[utterance.id] = BatchOutcome(
                utterance_id=utterance.id,
                raw_output=None,
                corrected=True,
                failed=True,
                error=str(outcome),
            )
        else:
            outcomes[utterance.id] = BatchOutcome(
                utterance_id=utterance.id, raw_output=outcome, corrected=True
            )
    return outcomes
