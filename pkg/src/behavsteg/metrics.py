"""Measurement primitives: permutation entropy, histogram distances, rhythms."""

from __future__ import annotations

from math import factorial

import numpy as np

from .activity import POSTING_KINDS, ActivityLog
from .codec import SECONDS_PER_HOUR, SLOT_COUNT, HourlyDistribution
from .errors import InsufficientDataError, ValidationError


def permutation_entropy(values, order: int = 3, delay: int = 1) -> float:
    """Normalized permutation entropy of a series, in [0, 1].

    Ordinal patterns of ``order`` values at spacing ``delay`` are extracted
    with a stable argsort, so tied values rank by position (earlier index
    lower). The pattern entropy uses natural log and is normalized by
    log(order!): 0 for a monotone or constant series, 1 when all patterns are
    equally frequent (Bandt & Pompe 2002).
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise ValidationError("series must be one-dimensional")
    if x.size and not np.all(np.isfinite(x)):
        raise ValidationError("series values must be finite")
    if order < 2:
        raise ValidationError(f"order must be >= 2, got {order}")
    if delay < 1:
        raise ValidationError(f"delay must be >= 1, got {delay}")
    n_windows = x.size - (order - 1) * delay
    if n_windows < 1:
        raise InsufficientDataError(
            f"series of length {x.size} too short for order={order}, delay={delay}"
        )
    idx = np.arange(n_windows)[:, None] + np.arange(order)[None, :] * delay
    patterns = np.argsort(x[idx], axis=1, kind="stable")
    _, counts = np.unique(patterns, axis=0, return_counts=True)
    p = counts / n_windows
    entropy = -(p * np.log(p)).sum()
    return float(entropy / np.log(factorial(order)))


def temporal_relevance(values, order: int = 3, delay: int = 1) -> float:
    """Temporal-relevance score of a series: normalized permutation entropy.

    Low values mean the recent past predicts what comes next; values near 1
    mean the sequence is pattern-free.
    """
    return permutation_entropy(values, order=order, delay=delay)


# --- histogram distances -------------------------------------------------------


def _as_distribution(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError(f"{name} must contain finite non-negative values")
    if abs(arr.sum() - 1.0) > 1e-9:
        raise ValidationError(f"{name} is not normalized (sums to {arr.sum()!r})")
    return arr


def _paired(p, q) -> tuple[np.ndarray, np.ndarray]:
    a = _as_distribution("p", p)
    b = _as_distribution("q", q)
    if a.shape != b.shape:
        raise ValidationError(f"bin counts differ: {a.size} vs {b.size}")
    return a, b


def total_variation(p, q) -> float:
    """Total variation distance between normalized histograms, in [0, 1]."""
    a, b = _paired(p, q)
    return float(0.5 * np.abs(a - b).sum())


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence KL(p || q), natural log.

    Zero bins of p contribute nothing; a zero bin of q under positive p mass
    violates absolute continuity and raises.
    """
    a, b = _paired(p, q)
    bad = (b == 0) & (a > 0)
    if np.any(bad):
        raise ValidationError(
            f"KL undefined: q is zero where p is positive (bin {int(np.argmax(bad))})"
        )
    mask = a > 0
    return float((a[mask] * np.log(a[mask] / b[mask])).sum())


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence, natural log; symmetric, in [0, ln 2]."""
    a, b = _paired(p, q)
    m = 0.5 * (a + b)

    def _half(x):
        mask = x > 0
        return (x[mask] * np.log(x[mask] / m[mask])).sum()

    return float(0.5 * _half(a) + 0.5 * _half(b))


def histogram(values, bins: int = 20, value_range=None, normalized: bool = True) -> np.ndarray:
    """Bin values into a (by default normalized) histogram."""
    arr = np.asarray(values, dtype=float)
    counts, _ = np.histogram(arr, bins=bins, range=value_range)
    counts = counts.astype(float)
    if not normalized:
        return counts
    total = counts.sum()
    if total == 0:
        raise InsufficientDataError("no values to bin")
    return counts / total


# --- activity rhythms -----------------------------------------------------------


def hourly_histogram(log: ActivityLog, user: str | None = None) -> HourlyDistribution:
    """Distribution of posting events (originals and retweets) over UTC hours.

    Restricted to one author when ``user`` is given; raises when there are no
    qualifying events.
    """
    counts = np.zeros(SLOT_COUNT)
    for e in log:
        if e.kind not in POSTING_KINDS:
            continue
        if user is not None and e.user_id != user:
            continue
        counts[int(e.timestamp // SECONDS_PER_HOUR) % SLOT_COUNT] += 1
    total = counts.sum()
    if total == 0:
        where = f" for user {user!r}" if user is not None else ""
        raise InsufficientDataError(f"no posting events{where}")
    return HourlyDistribution(tuple(counts / total))
