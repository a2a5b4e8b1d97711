"""Canonical data model for user activity: events, logs, graph snapshots, stats.

Timestamps are UTC epoch seconds throughout; hour-of-day anywhere in the
toolkit means the UTC hour. Time windows are half-open ``[t1, t2)`` so that
adjacent windows partition a span without overlap.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping

from .errors import InvalidWindowError, ParseError, ValidationError


class EventKind(str, Enum):
    POST_ORIGINAL = "post_original"
    RETWEET = "retweet"
    COMMENT = "comment"
    FOLLOW = "follow"
    LIKE = "like"
    DOWNLOAD = "download"


#: Kinds that are directed at another user (everything but an original post).
TARGETED_KINDS = frozenset(k for k in EventKind if k is not EventKind.POST_ORIGINAL)

#: Kinds that publish content and may carry a sentiment score.
CONTENT_KINDS = frozenset(
    {EventKind.POST_ORIGINAL, EventKind.RETWEET, EventKind.COMMENT}
)

#: Kinds that count as "posting" for hourly-rhythm statistics.
POSTING_KINDS = frozenset({EventKind.POST_ORIGINAL, EventKind.RETWEET})


@dataclass(frozen=True)
class ActivityEvent:
    """One timestamped user action.

    ``target_user`` is required for every kind except ``post_original`` and
    forbidden for it. ``sentiment`` lies in [-1, 1] when present.
    """

    user_id: str
    timestamp: float
    kind: EventKind
    target_user: str | None = None
    sentiment: float | None = None
    content_len: int | None = None

    def __post_init__(self):
        if not isinstance(self.user_id, str) or not self.user_id:
            raise ValidationError("user_id must be a non-empty string")
        if isinstance(self.timestamp, bool) or not isinstance(
            self.timestamp, (int, float)
        ):
            raise ValidationError("timestamp must be a number")
        if self.timestamp < 0:
            raise ValidationError(f"timestamp must be >= 0, got {self.timestamp}")
        try:
            kind = EventKind(self.kind)
        except ValueError:
            raise ValidationError(f"unknown event kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if kind is EventKind.POST_ORIGINAL:
            if self.target_user is not None:
                raise ValidationError("post_original events must not have target_user")
        else:
            if not self.target_user:
                raise ValidationError(f"{kind.value} events require target_user")
        if self.sentiment is not None and not -1.0 <= self.sentiment <= 1.0:
            raise ValidationError(
                f"sentiment must lie in [-1, 1], got {self.sentiment}"
            )
        if self.content_len is not None:
            if isinstance(self.content_len, bool) or not isinstance(
                self.content_len, int
            ):
                raise ValidationError("content_len must be an integer")
            if self.content_len < 0:
                raise ValidationError(
                    f"content_len must be >= 0, got {self.content_len}"
                )


class ActivityLog:
    """Immutable, time-ordered sequence of events.

    Construction sorts by timestamp with a stable sort, so the input order of
    equal-timestamp events is preserved. Safe to share across threads.
    """

    __slots__ = ("_events",)

    def __init__(self, events: Iterable[ActivityEvent]):
        evs = list(events)
        for e in evs:
            if not isinstance(e, ActivityEvent):
                raise ValidationError(f"not an ActivityEvent: {e!r}")
        evs.sort(key=lambda e: e.timestamp)
        self._events: tuple[ActivityEvent, ...] = tuple(evs)

    @property
    def events(self) -> tuple[ActivityEvent, ...]:
        return self._events

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[ActivityEvent]:
        return iter(self._events)

    def __getitem__(self, i):
        return self._events[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActivityLog):
            return NotImplemented
        return self._events == other._events

    def __hash__(self) -> int:
        return hash(self._events)

    def __repr__(self) -> str:
        return f"ActivityLog({len(self._events)} events)"

    def users(self) -> tuple[str, ...]:
        """Distinct event authors, sorted."""
        return tuple(sorted({e.user_id for e in self._events}))

    def for_user(self, user_id: str) -> tuple[ActivityEvent, ...]:
        return tuple(e for e in self._events if e.user_id == user_id)

    def between(self, t1: float, t2: float) -> tuple[ActivityEvent, ...]:
        """Events with timestamp in [t1, t2)."""
        if t1 >= t2:
            raise InvalidWindowError(f"need t1 < t2, got [{t1}, {t2})")
        return tuple(e for e in self._events if t1 <= e.timestamp < t2)

    def span(self) -> tuple[float, float]:
        """(earliest, latest) event timestamps. Raises on an empty log."""
        if not self._events:
            raise ValidationError("empty log has no time span")
        return self._events[0].timestamp, self._events[-1].timestamp


# --- ingestion -------------------------------------------------------------

_FIELDS = ("user_id", "timestamp", "kind", "target_user", "sentiment", "content_len")
CSV_HEADER = ",".join(_FIELDS)


def _event_from_mapping(obj: Mapping, lineno: int) -> ActivityEvent:
    def fail(field, msg):
        raise ParseError(lineno, msg, field=field)

    user_id = obj.get("user_id")
    if not isinstance(user_id, str) or not user_id:
        fail("user_id", "required non-empty string")

    ts = obj.get("timestamp")
    if ts is None or isinstance(ts, bool) or not isinstance(ts, (int, float)):
        fail("timestamp", "required number (epoch seconds)")
    if ts < 0:
        fail("timestamp", f"must be >= 0, got {ts}")

    kind_raw = obj.get("kind")
    try:
        kind = EventKind(kind_raw)
    except ValueError:
        fail("kind", f"unknown event kind {kind_raw!r}")

    target = obj.get("target_user")
    if target is not None and (not isinstance(target, str) or not target):
        fail("target_user", "must be a non-empty string when present")
    if kind is EventKind.POST_ORIGINAL and target is not None:
        fail("target_user", "must be absent for post_original")
    if kind is not EventKind.POST_ORIGINAL and target is None:
        fail("target_user", f"required for kind '{kind.value}'")

    sentiment = obj.get("sentiment")
    if sentiment is not None:
        if isinstance(sentiment, bool) or not isinstance(sentiment, (int, float)):
            fail("sentiment", "must be a number")
        if not -1.0 <= sentiment <= 1.0:
            fail("sentiment", f"must lie in [-1, 1], got {sentiment}")

    content_len = obj.get("content_len")
    if content_len is not None:
        if isinstance(content_len, bool) or not isinstance(content_len, int):
            fail("content_len", "must be an integer")
        if content_len < 0:
            fail("content_len", f"must be >= 0, got {content_len}")

    return ActivityEvent(user_id, ts, kind, target, sentiment, content_len)


def _read_text(stream) -> str:
    data = stream.read()
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(0, f"stream is not valid UTF-8: {exc}") from exc
    return data


def parse_activity_log(stream: IO, fmt: str = "jsonl") -> ActivityLog:
    """Parse a JSON Lines or CSV event stream into an ActivityLog.

    Unknown fields, unknown kinds, and invariant violations are rejected with
    an error naming the line number and field; nothing is silently skipped.
    """
    text = _read_text(stream)
    if fmt == "jsonl":
        return _parse_jsonl(text)
    if fmt == "csv":
        return _parse_csv(text)
    raise ValidationError(f"unknown log format {fmt!r} (expected 'jsonl' or 'csv')")


def _parse_jsonl(text: str) -> ActivityLog:
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ParseError(lineno, "event record must be a JSON object")
        unknown = sorted(set(obj) - set(_FIELDS))
        if unknown:
            raise ParseError(
                lineno, f"unknown field(s): {', '.join(unknown)}", field=unknown[0]
            )
        events.append(_event_from_mapping(obj, lineno))
    return ActivityLog(events)


def _number_cell(cell: str):
    """Parse a CSV numeric cell, keeping integers integral."""
    try:
        return int(cell)
    except ValueError:
        return float(cell)


def _parse_csv(text: str) -> ActivityLog:
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, f"missing header row (expected '{CSV_HEADER}')") from None
    if [h.strip() for h in header] != list(_FIELDS):
        raise ParseError(1, f"bad header {','.join(header)!r} (expected '{CSV_HEADER}')")
    events = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(cell == "" for cell in row):
            continue
        if len(row) != len(_FIELDS):
            raise ParseError(lineno, f"expected {len(_FIELDS)} columns, got {len(row)}")
        obj: dict = {}
        for field, cell in zip(_FIELDS, row):
            if cell == "":
                continue
            if field == "timestamp":
                try:
                    obj[field] = _number_cell(cell)
                except ValueError:
                    raise ParseError(lineno, f"not a number: {cell!r}", field=field) from None
            elif field == "sentiment":
                try:
                    obj[field] = float(cell)
                except ValueError:
                    raise ParseError(lineno, f"not a number: {cell!r}", field=field) from None
            elif field == "content_len":
                try:
                    obj[field] = int(cell)
                except ValueError:
                    raise ParseError(lineno, f"not an integer: {cell!r}", field=field) from None
            else:
                obj[field] = cell
        events.append(_event_from_mapping(obj, lineno))
    return ActivityLog(events)


def serialize_activity_log(log: ActivityLog, stream: IO, fmt: str = "jsonl") -> None:
    """Write a log in a form ``parse_activity_log`` reads back identically."""
    if fmt == "jsonl":
        for e in log:
            record = {"user_id": e.user_id, "timestamp": e.timestamp, "kind": e.kind.value}
            if e.target_user is not None:
                record["target_user"] = e.target_user
            if e.sentiment is not None:
                record["sentiment"] = e.sentiment
            if e.content_len is not None:
                record["content_len"] = e.content_len
            stream.write(json.dumps(record) + "\n")
    elif fmt == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(_FIELDS)
        for e in log:
            writer.writerow(
                [
                    e.user_id,
                    e.timestamp,
                    e.kind.value,
                    e.target_user if e.target_user is not None else "",
                    e.sentiment if e.sentiment is not None else "",
                    e.content_len if e.content_len is not None else "",
                ]
            )
    else:
        raise ValidationError(f"unknown log format {fmt!r} (expected 'jsonl' or 'csv')")


def guess_format(path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "jsonl"


def load_activity_log(path, fmt: str | None = None) -> ActivityLog:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_activity_log(fh, fmt or guess_format(path))


def save_activity_log(log: ActivityLog, path, fmt: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        serialize_activity_log(log, fh, fmt or guess_format(path))


# --- graph snapshots ---------------------------------------------------------


@dataclass(frozen=True)
class GraphSnapshot:
    """Who interacted with whom during [t1, t2).

    Vertices are every user seen as author or target in the window; edges are
    directed (source, target) pairs with interaction counts.
    """

    window: tuple[float, float]
    vertices: frozenset[str]
    edges: Mapping[tuple[str, str], int]

    def __post_init__(self):
        t1, t2 = self.window
        if t1 >= t2:
            raise InvalidWindowError(f"need t1 < t2, got [{t1}, {t2})")
        for (src, dst), count in self.edges.items():
            if src not in self.vertices or dst not in self.vertices:
                raise ValidationError(f"edge ({src}, {dst}) has endpoint outside vertices")
            if count < 1:
                raise ValidationError(f"edge ({src}, {dst}) has count {count} < 1")
        object.__setattr__(self, "edges", MappingProxyType(dict(self.edges)))


def snapshot(
    log: ActivityLog,
    t1: float,
    t2: float,
    kinds: Iterable[EventKind] | None = None,
) -> GraphSnapshot:
    """Interaction graph over [t1, t2).

    By default every targeted kind contributes an edge; pass ``kinds`` to
    restrict (e.g. follows only).
    """
    if t1 >= t2:
        raise InvalidWindowError(f"need t1 < t2, got [{t1}, {t2})")
    edge_kinds = frozenset(kinds) if kinds is not None else TARGETED_KINDS
    vertices: set[str] = set()
    edges: Counter = Counter()
    for e in log:
        if not t1 <= e.timestamp < t2:
            continue
        vertices.add(e.user_id)
        if e.target_user is not None:
            vertices.add(e.target_user)
            if e.kind in edge_kinds:
                edges[(e.user_id, e.target_user)] += 1
    return GraphSnapshot((t1, t2), frozenset(vertices), dict(edges))


# --- summary statistics ------------------------------------------------------


@dataclass(frozen=True)
class SummaryStats:
    user_count: int
    event_count: int
    retweet_rate: float
    mean_events_per_user: float
    per_kind_counts: Mapping[EventKind, int]

    def __post_init__(self):
        object.__setattr__(
            self, "per_kind_counts", MappingProxyType(dict(self.per_kind_counts))
        )

    def to_json_dict(self) -> dict:
        return {
            "user_count": self.user_count,
            "event_count": self.event_count,
            "retweet_rate": self.retweet_rate,
            "mean_events_per_user": self.mean_events_per_user,
            "per_kind_counts": {k.value: v for k, v in self.per_kind_counts.items()},
        }


def summarize(log: ActivityLog) -> SummaryStats:
    """Headline counts for a log; all zeros on an empty log."""
    counts = Counter(e.kind for e in log)
    users = {e.user_id for e in log}
    n_orig = counts[EventKind.POST_ORIGINAL]
    n_rt = counts[EventKind.RETWEET]
    tweets = n_orig + n_rt
    return SummaryStats(
        user_count=len(users),
        event_count=len(log),
        retweet_rate=n_rt / tweets if tweets else 0.0,
        mean_events_per_user=len(log) / len(users) if users else 0.0,
        per_kind_counts={k: counts.get(k, 0) for k in EventKind},
    )


# --- demo sentiment stub -------------------------------------------------------

# Deliberately tiny: real sentiment scores are expected to arrive with the
# data. This exists so raw-text demos can fill the sentiment field.
_VALENCE = {
    "love": 0.8, "loved": 0.8, "great": 0.8, "awesome": 0.9, "amazing": 0.9,
    "good": 0.6, "nice": 0.5, "happy": 0.7, "best": 0.8, "win": 0.6,
    "wonderful": 0.8, "fun": 0.6, "cool": 0.4, "like": 0.3, "thanks": 0.4,
    "hate": -0.8, "terrible": -0.9, "awful": -0.9, "horrible": -0.9,
    "bad": -0.6, "worst": -0.9, "sad": -0.6, "angry": -0.7, "lose": -0.5,
    "boring": -0.5, "annoying": -0.6, "fail": -0.6, "broken": -0.5,
    "wrong": -0.4, "sorry": -0.3,
}

_WORD_RE = re.compile(r"[a-z']+")


def score_sentiment(text: str) -> float:
    """Crude lexicon scorer for demo ingestion: mean per-word valence in [-1, 1]."""
    values = [_VALENCE[w] for w in _WORD_RE.findall(text.lower()) if w in _VALENCE]
    if not values:
        return 0.0
    return max(-1.0, min(1.0, sum(values) / len(values)))
