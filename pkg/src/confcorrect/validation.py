"""Input validation helpers shared across the package.

All ingestion-time checks funnel through these functions so error messages
stay uniform and the tolerance constants live in one place.
"""

from __future__ import annotations

from typing import Iterable, Sequence

#: Allowed deviation of a probability vector's sum from 1.
PROB_SUM_TOLERANCE = 1e-6

#: Entries within this distance of 0 or 1 are clipped onto the boundary;
#: anything further outside [0, 1] is rejected.
PROB_CLIP_TOLERANCE = 1e-9


class ConfCorrectError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ConfCorrectError):
    """Invalid input data or configuration."""


def check_unit_interval(value: float, name: str) -> float:
    """Require ``value`` to lie in [0, 1]."""
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must be in [0, 1], got {value!r}")
    return float(value)


def check_positive(value: float, name: str) -> float:
    if not value > 0:
        raise ValidationError(f"{name} must be > 0, got {value!r}")
    return value


def check_choice(value: str, choices: Iterable[str], name: str) -> str:
    allowed = tuple(choices)
    if value not in allowed:
        raise ValidationError(f"{name} must be one of {allowed}, got {value!r}")
    return value


def check_probability_vector(values: Sequence[float], context: str = "") -> tuple[float, ...]:
    """Validate and canonicalize one token posterior.

    Entries must lie in [0, 1] up to ``PROB_CLIP_TOLERANCE`` (boundary noise
    is clipped, anything worse is rejected) and the vector must sum to 1
    within ``PROB_SUM_TOLERANCE``. Needs at least two entries.

    Returns the clipped tuple. ``context`` is prepended to error messages so
    callers can name the utterance/word/frame the vector came from.
    """
    where = f"{context}: " if context else ""
    if len(values) < 2:
        raise ValidationError(f"{where}probability vector needs >= 2 entries, got {len(values)}")
    clipped = []
    for k, v in enumerate(values):
        v = float(v)
        if v < 0.0:
            if v >= -PROB_CLIP_TOLERANCE:
                v = 0.0
            else:
                raise ValidationError(f"{where}entry {k} is negative ({v!r})")
        elif v > 1.0:
            if v <= 1.0 + PROB_CLIP_TOLERANCE:
                v = 1.0
            else:
                raise ValidationError(f"{where}entry {k} exceeds 1 ({v!r})")
        clipped.append(v)
    total = sum(clipped)
    if abs(total - 1.0) > PROB_SUM_TOLERANCE:
        raise ValidationError(f"{where}probabilities sum to {total!r}, expected 1 within {PROB_SUM_TOLERANCE}")
    return tuple(clipped)
