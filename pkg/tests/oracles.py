"""Independent reference implementations used to freeze expected values.

These stay deliberately separate from the package code paths they check:
entropy scores are evaluated in 50-digit arithmetic with mpmath, and edit
distance is an exhaustive memoized recursion instead of the package's
iterative DP.
"""

from __future__ import annotations

import sys
from functools import lru_cache

from mpmath import mp, mpf, log, power

mp.dps = 50
sys.setrecursionlimit(100_000)


def gibbs_oracle(probs) -> float:
    """High-precision 1 + (1/ln V) * sum p ln p with 0 ln 0 = 0."""
    total = mpf(0)
    for p in probs:
        p = mpf(repr(float(p)))
        if p > 0:
            total += p * log(p)
    return float(1 + total / log(len(probs)))


def tsallis_oracle(probs, alpha: float) -> float:
    """High-precision (V^(1-a) - sum p^a) / (V^(1-a) - 1) with 0^a = 0."""
    a = mpf(repr(float(alpha)))
    scale = power(len(probs), 1 - a)
    total = mpf(0)
    for p in probs:
        p = mpf(repr(float(p)))
        if p > 0:
            total += power(p, a)
    return float((scale - total) / (scale - 1))


def geometric_mean_oracle(values) -> float:
    product = mpf(1)
    for v in values:
        product *= mpf(repr(float(v)))
    return float(power(product, mpf(1) / len(values)))


@lru_cache(maxsize=None)
def brute_edit_distance(a: tuple, b: tuple) -> int:
    """Exhaustive-search minimum edit distance (match/sub/ins/del, unit cost)."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    best = brute_edit_distance(a[1:], b[1:]) + (0 if a[0] == b[0] else 1)
    alt = brute_edit_distance(a[1:], b) + 1
    if alt < best:
        best = alt
    alt = brute_edit_distance(a, b[1:]) + 1
    if alt < best:
        best = alt
    return best


def solve_binary_peak_for_gibbs(target: float, vocab_size: int, tol: float = 1e-13) -> float:
    """Peak probability q such that [q, 1-q, 0, ...] over ``vocab_size``
    entries has Gibbs confidence ``target``. Bisection on q in [0.5, 1)."""
    if not 0.0 < target < 1.0:
        raise ValueError("target must be strictly inside (0, 1)")

    def conf(q: float) -> float:
        return gibbs_oracle([q, 1.0 - q] + [0.0] * (vocab_size - 2))

    floor = conf(0.5)  # two nonzero entries cannot get more uncertain than this
    if target <= floor:
        raise ValueError(f"target {target} below the binary floor {floor:.4f} for V={vocab_size}")

    lo, hi = 0.5, 1.0 - 1e-12
    for _ in range(200):
        mid = (lo + hi) / 2
        if conf(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return (lo + hi) / 2


# Values frozen from the oracles above (50-digit evaluation, rounded to float):
GIBBS_HALF_HALF = 0.5                      # gibbs_oracle([0.5, 0.5, 0, 0])
TSALLIS_HALF_HALF_A05 = 0.585786437626905  # tsallis_oracle([0.5, 0.5, 0, 0], 0.5) == 2 - sqrt(2)
GEOMEAN_FIG2 = 0.8033711905546127          # geometric_mean_oracle([1.0, 0.85, 0.61])
