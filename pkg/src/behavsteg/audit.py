"""Six-constraint security audit of one user against a population baseline.

The constraints pair an instantaneous and a temporal check over three views
of a user: published content, the user's own vertex behavior, and the edge
behavior toward neighbors:

1. ``content_instant``    distance between the user's sentiment histogram and
                          the population's (20 bins over [-1, 1]).
2. ``content_temporal``   deviation of the sentiment series' temporal-relevance
                          score from the population mean.
3. ``vertex_instant``     worst normalized deviation among: hourly-rhythm
                          distance to the population, posting rate, original
                          ratio, mean content length.
4. ``edge_instant``       worst normalized deviation among: neighbor
                          concentration, out-degree, reciprocity.
5. ``vertex_temporal``    deviation of the inter-post-interval series'
                          temporal-relevance score from the population mean.
6. ``edge_temporal``      deviation of the per-window out-degree series'
                          temporal-relevance score from the population mean.

Scalar deviations are normalized by the population dispersion (z-score
style) so one threshold per constraint is meaningful across units; histogram
deviations use total variation (or Jensen-Shannon) which is already bounded.
A constraint that cannot be computed from the available data is reported as
indeterminate and fails closed.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from .activity import (
    CONTENT_KINDS,
    POSTING_KINDS,
    ActivityEvent,
    ActivityLog,
    EventKind,
)
from .codec import SECONDS_PER_DAY, SLOT_COUNT, SECONDS_PER_HOUR, HourlyDistribution
from .errors import InsufficientDataError, InvalidWindowError, ValidationError
from .metrics import hourly_histogram, js_divergence, temporal_relevance, total_variation

CONSTRAINTS = (
    "content_instant",
    "content_temporal",
    "vertex_instant",
    "edge_instant",
    "vertex_temporal",
    "edge_temporal",
)

SENTIMENT_BINS = 20
DEFAULT_WINDOW_LEN = float(SECONDS_PER_DAY)

_DISTANCES: Mapping[str, Callable] = {"tv": total_variation, "js": js_divergence}


@dataclass(frozen=True)
class PEParams:
    """Order and delay for the temporal-relevance (permutation entropy) scores."""

    order: int = 3
    delay: int = 1

    def __post_init__(self):
        if self.order < 2:
            raise ValidationError(f"order must be >= 2, got {self.order}")
        if self.delay < 1:
            raise ValidationError(f"delay must be >= 1, got {self.delay}")


# --- per-window feature extractors ------------------------------------------


@dataclass(frozen=True)
class VertexFeatures:
    """A user's own behavior inside one window."""

    post_count: int
    original_ratio: float
    hourly: HourlyDistribution | None
    mean_content_len: float
    active: bool


@dataclass(frozen=True)
class EdgeFeatures:
    """A user's interaction pattern toward neighbors inside one window."""

    neighbor_concentration: float
    out_degree: int
    reciprocity: float


def vertex_features(log: ActivityLog, user: str, window: tuple[float, float]) -> VertexFeatures:
    """Vertex behavior of ``user`` during [t1, t2); zero-activity is flagged."""
    t1, t2 = window
    if t1 >= t2:
        raise InvalidWindowError(f"need t1 < t2, got [{t1}, {t2})")
    events = [e for e in log if e.user_id == user and t1 <= e.timestamp < t2]
    posts = [e for e in events if e.kind in POSTING_KINDS]
    originals = sum(1 for e in posts if e.kind is EventKind.POST_ORIGINAL)
    lens = [e.content_len for e in events if e.content_len is not None]
    hourly = None
    if posts:
        counts = np.zeros(SLOT_COUNT)
        for e in posts:
            counts[int(e.timestamp // SECONDS_PER_HOUR) % SLOT_COUNT] += 1
        hourly = HourlyDistribution(tuple(counts / counts.sum()))
    return VertexFeatures(
        post_count=len(posts),
        original_ratio=originals / len(posts) if posts else 0.0,
        hourly=hourly,
        mean_content_len=float(np.mean(lens)) if lens else 0.0,
        active=bool(events),
    )


def _concentration(target_counts: Mapping[str, int]) -> float:
    """Normalized Herfindahl index of interaction shares.

    1 when a single neighbor receives everything, 0 for an even split (and,
    by convention, when there are no targeted interactions at all).
    """
    k = len(target_counts)
    if k == 0:
        return 0.0
    if k == 1:
        return 1.0
    total = sum(target_counts.values())
    shares = np.array([c / total for c in target_counts.values()])
    return float(((shares**2).sum() - 1.0 / k) / (1.0 - 1.0 / k))


def edge_features(log: ActivityLog, user: str, window: tuple[float, float]) -> EdgeFeatures:
    """Edge behavior of ``user`` during [t1, t2)."""
    t1, t2 = window
    if t1 >= t2:
        raise InvalidWindowError(f"need t1 < t2, got [{t1}, {t2})")
    target_counts: dict[str, int] = {}
    inbound: set[str] = set()
    for e in log:
        if not t1 <= e.timestamp < t2:
            continue
        if e.user_id == user and e.target_user is not None:
            target_counts[e.target_user] = target_counts.get(e.target_user, 0) + 1
        elif e.target_user == user:
            inbound.add(e.user_id)
    out_degree = len(target_counts)
    reciprocity = (
        len(set(target_counts) & inbound) / out_degree if out_degree else 0.0
    )
    return EdgeFeatures(_concentration(target_counts), out_degree, reciprocity)


# --- per-user profiles over a windowed span ----------------------------------


@dataclass(frozen=True, eq=False)
class _UserProfile:
    rate: float
    original_ratio: float
    mean_content_len: float
    hourly: HourlyDistribution | None
    sentiment_hist: np.ndarray | None
    concentration: float
    out_degree: float
    reciprocity: float
    content_pe: float | None
    interval_pe: float | None
    outdeg_pe: float | None


def _aligned_span(log: ActivityLog, window_len: float) -> tuple[float, int]:
    """Window grid aligned to multiples of window_len since the epoch.

    With the default 24 h windows this aligns to UTC midnights.
    """
    t_min, t_max = log.span()
    start = floor(t_min / window_len) * window_len
    n_windows = int((t_max - start) // window_len) + 1
    return start, n_windows


def _group_events(
    log: ActivityLog,
) -> tuple[dict[str, list[ActivityEvent]], dict[str, set[str]]]:
    """One pass: events per author plus, per user, who targeted them."""
    by_user: dict[str, list[ActivityEvent]] = {}
    inbound: dict[str, set[str]] = {}
    for e in log:
        by_user.setdefault(e.user_id, []).append(e)
        if e.target_user is not None:
            inbound.setdefault(e.target_user, set()).add(e.user_id)
    return by_user, inbound


def _try_pe(values: Sequence[float], pe: PEParams) -> float | None:
    try:
        return temporal_relevance(values, order=pe.order, delay=pe.delay)
    except InsufficientDataError:
        return None


def _profile_from_events(
    events: Sequence[ActivityEvent],
    inbound: set[str],
    span_start: float,
    n_windows: int,
    window_len: float,
    pe: PEParams,
) -> _UserProfile:
    posts = [e for e in events if e.kind in POSTING_KINDS]
    originals = sum(1 for e in posts if e.kind is EventKind.POST_ORIGINAL)
    lens = [e.content_len for e in events if e.content_len is not None]

    hourly = None
    if posts:
        counts = np.zeros(SLOT_COUNT)
        for e in posts:
            counts[int(e.timestamp // SECONDS_PER_HOUR) % SLOT_COUNT] += 1
        hourly = HourlyDistribution(tuple(counts / counts.sum()))

    sentiments = [
        e.sentiment
        for e in events
        if e.kind in CONTENT_KINDS and e.sentiment is not None
    ]
    sentiment_hist = None
    if sentiments:
        counts, _ = np.histogram(sentiments, bins=SENTIMENT_BINS, range=(-1.0, 1.0))
        sentiment_hist = counts.astype(float) / counts.sum()

    target_counts: dict[str, int] = {}
    window_targets: dict[int, set[str]] = {}
    for e in events:
        if e.target_user is None:
            continue
        target_counts[e.target_user] = target_counts.get(e.target_user, 0) + 1
        w = int((e.timestamp - span_start) // window_len)
        window_targets.setdefault(w, set()).add(e.target_user)
    outdeg_series = [len(window_targets.get(i, ())) for i in range(n_windows)]
    out_degree = len(target_counts)
    reciprocity = (
        len(set(target_counts) & inbound) / out_degree if out_degree else 0.0
    )

    post_times = [e.timestamp for e in posts]
    intervals = np.diff(post_times) if len(post_times) >= 2 else np.array([])

    return _UserProfile(
        rate=len(posts) / n_windows,
        original_ratio=originals / len(posts) if posts else 0.0,
        mean_content_len=float(np.mean(lens)) if lens else 0.0,
        hourly=hourly,
        sentiment_hist=sentiment_hist,
        concentration=_concentration(target_counts),
        out_degree=float(np.mean(outdeg_series)),
        reciprocity=reciprocity,
        content_pe=_try_pe(sentiments, pe) if sentiments else None,
        interval_pe=_try_pe(intervals, pe) if intervals.size else None,
        outdeg_pe=_try_pe(outdeg_series, pe),
    )


def _population_profiles(
    log: ActivityLog, window_len: float, pe: PEParams
) -> dict[str, _UserProfile]:
    span_start, n_windows = _aligned_span(log, window_len)
    by_user, inbound = _group_events(log)
    return {
        u: _profile_from_events(
            evs, inbound.get(u, set()), span_start, n_windows, window_len, pe
        )
        for u, evs in by_user.items()
    }


# --- baseline ------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureStat:
    """Population mean and dispersion of one scalar feature."""

    mean: float
    std: float


def _stat(values: Sequence[float]) -> FeatureStat:
    arr = np.asarray(values, dtype=float)
    return FeatureStat(float(arr.mean()), float(arr.std()))


def _optional_stat(values: Sequence[float]) -> FeatureStat | None:
    vals = [v for v in values if v is not None]
    return _stat(vals) if vals else None


@dataclass(frozen=True, eq=False)
class Baseline:
    """Population reference the six constraints compare against."""

    n_users: int
    window_len: float
    pe_params: PEParams
    hourly: HourlyDistribution
    sentiment_hist: np.ndarray | None
    rate: FeatureStat
    original_ratio: FeatureStat
    mean_content_len: FeatureStat
    concentration: FeatureStat
    out_degree: FeatureStat
    reciprocity: FeatureStat
    content_pe: FeatureStat | None
    interval_pe: FeatureStat | None
    outdeg_pe: FeatureStat | None


def build_baseline(
    log: ActivityLog,
    window_len: float = DEFAULT_WINDOW_LEN,
    pe_params: PEParams = PEParams(),
) -> Baseline:
    """Average per-user features across a population log (>= 2 users)."""
    users = log.users()
    if len(users) < 2:
        raise ValidationError(f"baseline requires >= 2 users, got {len(users)}")
    profiles = _population_profiles(log, window_len, pe_params)

    all_sentiments = [
        e.sentiment
        for e in log
        if e.kind in CONTENT_KINDS and e.sentiment is not None
    ]
    sentiment_hist = None
    if all_sentiments:
        counts, _ = np.histogram(all_sentiments, bins=SENTIMENT_BINS, range=(-1.0, 1.0))
        sentiment_hist = counts.astype(float) / counts.sum()

    ps = list(profiles.values())
    return Baseline(
        n_users=len(users),
        window_len=window_len,
        pe_params=pe_params,
        hourly=hourly_histogram(log),
        sentiment_hist=sentiment_hist,
        rate=_stat([p.rate for p in ps]),
        original_ratio=_stat([p.original_ratio for p in ps]),
        mean_content_len=_stat([p.mean_content_len for p in ps]),
        concentration=_stat([p.concentration for p in ps]),
        out_degree=_stat([p.out_degree for p in ps]),
        reciprocity=_stat([p.reciprocity for p in ps]),
        content_pe=_optional_stat([p.content_pe for p in ps]),
        interval_pe=_optional_stat([p.interval_pe for p in ps]),
        outdeg_pe=_optional_stat([p.outdeg_pe for p in ps]),
    )


# --- scoring ---------------------------------------------------------------------


def _zdev(x: float, stat: FeatureStat) -> float:
    """Dispersion-normalized absolute deviation, robust to float dust.

    A population with zero dispersion yields 0 for members exactly at the
    mean and infinity for anything else (fail closed).
    """
    scale = max(1.0, abs(x), abs(stat.mean))
    d = abs(x - stat.mean)
    if d <= 1e-12 * scale:
        return 0.0
    if stat.std <= 1e-12 * scale:
        return float("inf")
    return d / stat.std


def _abs_dev(x: float | None, stat: FeatureStat | None) -> float | None:
    if x is None or stat is None:
        return None
    return abs(x - stat.mean)


def _distance_fn(hist_distance: str) -> Callable:
    try:
        return _DISTANCES[hist_distance]
    except KeyError:
        raise ValidationError(
            f"unknown distance {hist_distance!r} (expected one of {sorted(_DISTANCES)})"
        ) from None


def _constraint_scores(
    profile: _UserProfile, baseline: Baseline, hist_distance: str
) -> dict[str, float | None]:
    dist = _distance_fn(hist_distance)

    content_instant = None
    if profile.sentiment_hist is not None and baseline.sentiment_hist is not None:
        content_instant = dist(profile.sentiment_hist, baseline.sentiment_hist)

    vertex_instant = None
    if profile.hourly is not None:
        vertex_instant = max(
            dist(np.array(profile.hourly.probs), np.array(baseline.hourly.probs)),
            _zdev(profile.rate, baseline.rate),
            _zdev(profile.original_ratio, baseline.original_ratio),
            _zdev(profile.mean_content_len, baseline.mean_content_len),
        )

    edge_instant = max(
        _zdev(profile.concentration, baseline.concentration),
        _zdev(profile.out_degree, baseline.out_degree),
        _zdev(profile.reciprocity, baseline.reciprocity),
    )

    return {
        "content_instant": content_instant,
        "content_temporal": _abs_dev(profile.content_pe, baseline.content_pe),
        "vertex_instant": vertex_instant,
        "edge_instant": edge_instant,
        "vertex_temporal": _abs_dev(profile.interval_pe, baseline.interval_pe),
        "edge_temporal": _abs_dev(profile.outdeg_pe, baseline.outdeg_pe),
    }


def score_user(
    log: ActivityLog,
    user: str,
    baseline: Baseline,
    *,
    pe_params: PEParams | None = None,
    window_len: float | None = None,
    hist_distance: str = "tv",
) -> dict[str, float | None]:
    """Raw constraint scores for one user (None where data is insufficient)."""
    pe = pe_params or baseline.pe_params
    wl = window_len or baseline.window_len
    span_start, n_windows = _aligned_span(log, wl)
    by_user, inbound = _group_events(log)
    if user not in by_user:
        raise ValidationError(f"user {user!r} not present in log")
    profile = _profile_from_events(
        by_user[user], inbound.get(user, set()), span_start, n_windows, wl, pe
    )
    return _constraint_scores(profile, baseline, hist_distance)


def score_population(
    log: ActivityLog,
    baseline: Baseline,
    *,
    pe_params: PEParams | None = None,
    window_len: float | None = None,
    hist_distance: str = "tv",
) -> dict[str, dict[str, float | None]]:
    """Raw constraint scores for every author in the log."""
    pe = pe_params or baseline.pe_params
    wl = window_len or baseline.window_len
    profiles = _population_profiles(log, wl, pe)
    return {
        u: _constraint_scores(p, baseline, hist_distance) for u, p in profiles.items()
    }


# --- thresholds and reports --------------------------------------------------------


@dataclass(frozen=True)
class Thresholds:
    """One non-negative tolerance per constraint."""

    content_instant: float
    content_temporal: float
    vertex_instant: float
    edge_instant: float
    vertex_temporal: float
    edge_temporal: float

    def __post_init__(self):
        for name in CONSTRAINTS:
            if getattr(self, name) < 0:
                raise ValidationError(f"threshold {name} must be >= 0")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in CONSTRAINTS}


def calibrate_thresholds(
    log: ActivityLog,
    baseline: Baseline,
    percentile: float = 95.0,
    *,
    hist_distance: str = "tv",
) -> Thresholds:
    """Set each threshold at a percentile of the population's own scores.

    At the default 95th percentile roughly 5% of the calibration users fail
    each constraint; at 100 every calibration user passes.
    """
    if not 50.0 < percentile <= 100.0:
        raise ValidationError(f"percentile must lie in (50, 100], got {percentile}")
    all_scores = score_population(log, baseline, hist_distance=hist_distance)
    eps: dict[str, float] = {}
    for name in CONSTRAINTS:
        values = [s[name] for s in all_scores.values() if s[name] is not None]
        finite = [v for v in values if np.isfinite(v)]
        eps[name] = float(np.percentile(finite, percentile)) if finite else 0.0
    return Thresholds(**eps)


@dataclass(frozen=True)
class ConstraintResult:
    score: float | None
    threshold: float
    status: str  # "pass" | "fail" | "indeterminate"

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass(frozen=True)
class AuditReport:
    """Outcome of the six constraints for one user; overall pass is their AND."""

    user_id: str
    constraints: Mapping[str, ConstraintResult]
    overall_pass: bool

    def __post_init__(self):
        object.__setattr__(self, "constraints", MappingProxyType(dict(self.constraints)))

    @property
    def indeterminate(self) -> bool:
        return any(r.status == "indeterminate" for r in self.constraints.values())

    def to_json_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "overall_pass": self.overall_pass,
            "indeterminate": self.indeterminate,
            "constraints": {
                name: {
                    "score": r.score if r.score is None or np.isfinite(r.score) else None,
                    "threshold": r.threshold,
                    "status": r.status,
                }
                for name, r in self.constraints.items()
            },
        }


def assemble_report(
    user_id: str, scores: Mapping[str, float | None], thresholds: Thresholds
) -> AuditReport:
    """Apply thresholds to raw scores. Indeterminate scores fail closed."""
    results: dict[str, ConstraintResult] = {}
    for name in CONSTRAINTS:
        score = scores[name]
        eps = getattr(thresholds, name)
        if score is None:
            status = "indeterminate"
        elif score <= eps:
            status = "pass"
        else:
            status = "fail"
        results[name] = ConstraintResult(score, eps, status)
    overall = all(r.passed for r in results.values())
    return AuditReport(user_id, results, overall)


def audit(
    log: ActivityLog,
    user: str,
    baseline: Baseline,
    thresholds: Thresholds,
    pe_params: PEParams | None = None,
    window_len: float | None = None,
    *,
    hist_distance: str = "tv",
) -> AuditReport:
    """Evaluate the six security constraints for ``user`` against ``baseline``."""
    scores = score_user(
        log,
        user,
        baseline,
        pe_params=pe_params,
        window_len=window_len,
        hist_distance=hist_distance,
    )
    return assemble_report(user, scores, thresholds)
