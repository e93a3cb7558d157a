"""Word-level minimum-edit-distance alignment and word error rate.

Unit costs for substitution, insertion, and deletion. The backtrace breaks
cost ties deterministically (match > substitute > delete > insert) so
alignments, and everything derived from them, are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .validation import ValidationError

MATCH = "match"
SUBSTITUTE = "substitute"
DELETE = "delete"
INSERT = "insert"

#: Placeholder for the absent side of an insert/delete in dump output.
GAP = "*"


@dataclass(frozen=True)
class EditOp:
    op: str
    ref_word: Optional[str] = None
    hyp_word: Optional[str] = None


@dataclass(frozen=True)
class Alignment:
    ops: tuple[EditOp, ...]
    substitutions: int
    insertions: int
    deletions: int
    matches: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.insertions + self.deletions


def edit_distance(reference: Sequence[str], hypothesis: Sequence[str]) -> int:
    """Minimum number of word edits turning ``reference`` into ``hypothesis``."""
    m, n = len(reference), len(hypothesis)
    if m == 0:
        return n
    if n == 0:
        return m
    prev = list(range(n + 1))
    cur = [0] * (n + 1)
    for i in range(m):
        r = reference[i]
        cur[0] = i + 1
        for j in range(n):
            if r == hypothesis[j]:
                cur[j + 1] = prev[j]
            else:
                best = prev[j]
                up = prev[j + 1]
                if up < best:
                    best = up
                left = cur[j]
                if left < best:
                    best = left
                cur[j + 1] = best + 1
        prev, cur = cur, prev
    return prev[n]


def align(reference: Sequence[str], hypothesis: Sequence[str]) -> Alignment:
    """Minimal-cost alignment between two word lists.

    Either list may be empty. When several paths tie on cost the backtrace
    prefers match, then substitute, then delete, then insert.
    """
    m, n = len(reference), len(hypothesis)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dp[i][0] = i
    for j in range(1, n + 1):
        dp[0][j] = j
    for i in range(1, m + 1):
        r = reference[i - 1]
        row = dp[i]
        above = dp[i - 1]
        for j in range(1, n + 1):
            diag = above[j - 1]
            if r != hypothesis[j - 1]:
                diag += 1
            best = diag
            up = above[j] + 1
            if up < best:
                best = up
            left = row[j - 1] + 1
            if left < best:
                best = left
            row[j] = best

    ops: list[EditOp] = []
    subs = ins = dels = matches = 0
    i, j = m, n
    while i > 0 or j > 0:
        cost = dp[i][j]
        if i > 0 and j > 0 and reference[i - 1] == hypothesis[j - 1] and cost == dp[i - 1][j - 1]:
            ops.append(EditOp(MATCH, reference[i - 1], hypothesis[j - 1]))
            matches += 1
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and cost == dp[i - 1][j - 1] + 1 and reference[i - 1] != hypothesis[j - 1]:
            ops.append(EditOp(SUBSTITUTE, reference[i - 1], hypothesis[j - 1]))
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and cost == dp[i - 1][j] + 1:
            ops.append(EditOp(DELETE, ref_word=reference[i - 1]))
            dels += 1
            i -= 1
        else:
            ops.append(EditOp(INSERT, hyp_word=hypothesis[j - 1]))
            ins += 1
            j -= 1
    ops.reverse()
    return Alignment(
        ops=tuple(ops),
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        matches=matches,
    )


def utterance_wer(reference: Sequence[str], hypothesis: Sequence[str]) -> float:
    """(substitutions + insertions + deletions) / reference length.

    May exceed 1.0 when insertions dominate. Undefined (raises) for an empty
    reference; callers must exclude those utterances and count them.
    """
    if len(reference) == 0:
        raise ValidationError("WER is undefined for an empty reference")
    return edit_distance(reference, hypothesis) / len(reference)


def corpus_wer(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> float:
    """Pooled corpus WER: total edits over total reference words."""
    edits = 0
    ref_words = 0
    for index, (reference, hypothesis) in enumerate(pairs):
        if len(reference) == 0:
            raise ValidationError(f"pair {index}: WER is undefined for an empty reference")
        edits += edit_distance(reference, hypothesis)
        ref_words += len(reference)
    if ref_words == 0:
        raise ValidationError("corpus WER is undefined for an empty pair list")
    return edits / ref_words


def format_alignment(alignment: Alignment) -> str:
    """Render ops as space-separated ``op:ref→hyp`` tokens (``*`` = absent)."""
    parts = []
    for op in alignment.ops:
        ref = op.ref_word if op.ref_word is not None else GAP
        hyp = op.hyp_word if op.hyp_word is not None else GAP
        parts.append(f"{op.op}:{ref}→{hyp}")
    return " ".join(parts)
