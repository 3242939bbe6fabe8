"""Event log and follow graph: parsing, validation, indexing, in-flow streams.

The on-disk formats are tab-separated text (see docs/formats.md). Events are
kept in a single global order by (ts, event_id) so that every downstream
computation (queue positions, exposure replay, simulation oracles) sees the
same deterministic timeline.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional


class EventKind(Enum):
    TWEET = "T"
    RETWEET = "R"


class LogFormatError(ValueError):
    """The log as a whole is unusable (e.g. duplicate event ids)."""


class UnknownUserError(KeyError):
    def __init__(self, user: str):
        super().__init__(user)
        self.user = user

    def __str__(self) -> str:
        return f"unknown user: {self.user!r}"


@dataclass(frozen=True)
class Event:
    event_id: int
    ts: int
    author: str
    kind: EventKind
    orig_event_id: Optional[int] = None
    orig_author: Optional[str] = None
    marks: frozenset[str] = frozenset()

    @property
    def key(self) -> tuple[int, int]:
        """Global total-order key: timestamp, ties broken by event id."""
        return (self.ts, self.event_id)

    def to_tsv(self) -> str:
        fields = [str(self.ts), self.author, self.kind.value, str(self.event_id)]
        if self.kind is EventKind.RETWEET:
            fields += [str(self.orig_event_id), self.orig_author]
        if self.marks:
            fields.append(",".join(sorted(self.marks)))
        return "\t".join(fields)


@dataclass(frozen=True)
class LineReject:
    line_no: int
    line: str
    reason: str


@dataclass
class ParseReport:
    rejects: list[LineReject] = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return len(self.rejects)


class SocialGraph:
    """Static directed follow relation (follower -> followee)."""

    def __init__(self, edges: Iterable[tuple[str, str]], nodes: Iterable[str] = ()):
        followees: dict[str, set[str]] = {}
        followers: dict[str, set[str]] = {}
        node_set: set[str] = set(nodes)
        for follower, followee in edges:
            if follower == followee:
                raise LogFormatError(f"self-loop edge for user {follower!r}")
            followees.setdefault(follower, set()).add(followee)
            followers.setdefault(followee, set()).add(follower)
            node_set.add(follower)
            node_set.add(followee)
        self._followees = {u: frozenset(vs) for u, vs in followees.items()}
        self._followers = {u: frozenset(vs) for u, vs in followers.items()}
        self._nodes = frozenset(node_set)

    @property
    def nodes(self) -> frozenset[str]:
        return self._nodes

    def __contains__(self, user: str) -> bool:
        return user in self._nodes

    def followees(self, user: str) -> frozenset[str]:
        if user not in self._nodes:
            raise UnknownUserError(user)
        return self._followees.get(user, frozenset())

    def followers(self, user: str) -> frozenset[str]:
        if user not in self._nodes:
            raise UnknownUserError(user)
        return self._followers.get(user, frozenset())

    def n_edges(self) -> int:
        return sum(len(v) for v in self._followees.values())

    def edges(self) -> Iterator[tuple[str, str]]:
        for u in sorted(self._followees):
            for v in sorted(self._followees[u]):
                yield (u, v)

    def to_tsv(self) -> str:
        return "".join(f"{u}\t{v}\n" for u, v in self.edges())

    @classmethod
    def from_tsv(cls, lines: Iterable[str]) -> "SocialGraph":
        edges = []
        for line_no, raw in enumerate(lines, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise LogFormatError(f"graph line {line_no}: expected 'follower<TAB>followee'")
            edges.append((parts[0], parts[1]))
        return cls(edges)


class EventLog:
    """Immutable, globally sorted event collection with author/id indices."""

    def __init__(self, events: Iterable[Event]):
        evs = sorted(events, key=lambda e: e.key)
        by_id: dict[int, Event] = {}
        by_author: dict[str, list[Event]] = {}
        for e in evs:
            if e.event_id in by_id:
                raise LogFormatError(f"duplicate event_id {e.event_id}")
            by_id[e.event_id] = e
            by_author.setdefault(e.author, []).append(e)
        self._events = evs
        self._by_id = by_id
        self._by_author = by_author

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    @property
    def events(self) -> list[Event]:
        return self._events

    def get(self, event_id: int) -> Optional[Event]:
        return self._by_id.get(event_id)

    def by_author(self, author: str) -> list[Event]:
        return self._by_author.get(author, [])

    @property
    def authors(self) -> Iterable[str]:
        return self._by_author.keys()

    def span(self) -> tuple[int, int]:
        if not self._events:
            return (0, 0)
        return (self._events[0].ts, self._events[-1].ts)

    def to_tsv(self) -> str:
        return "".join(e.to_tsv() + "\n" for e in self._events)


@dataclass(frozen=True)
class InFlowStream:
    """Events authored by a user's followees inside a closed [start, end] window."""

    user: str
    window: tuple[int, int]
    events: tuple[Event, ...]

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)


_RT_RE = re.compile(r"^RT\s+@([A-Za-z0-9_]+):", re.IGNORECASE)


def detect_retweet_convention(text: str) -> Optional[tuple[str, str]]:
    """Return ("RT", cited_user) if the text starts with the 'RT @user:' prefix."""
    m = _RT_RE.match(text)
    if m is None:
        return None
    return ("RT", m.group(1))


def _parse_line(line_no: int, line: str) -> Event:
    parts = line.split("\t")
    if len(parts) < 4:
        raise ValueError("expected at least 4 tab-separated fields")
    try:
        ts = int(parts[0])
    except ValueError:
        raise ValueError(f"bad timestamp {parts[0]!r}")
    author = parts[1]
    if not author:
        raise ValueError("empty author")
    kind_token = parts[2]
    if kind_token == "T":
        base = 4
        kind = EventKind.TWEET
        orig_id = orig_author = None
    elif kind_token == "R":
        base = 6
        kind = EventKind.RETWEET
        if len(parts) < 6:
            raise ValueError("retweet line needs orig_event_id and orig_author")
        try:
            orig_id = int(parts[4])
        except ValueError:
            raise ValueError(f"bad orig_event_id {parts[4]!r}")
        orig_author = parts[5]
        if not orig_author:
            raise ValueError("empty orig_author")
    else:
        raise ValueError(f"bad kind {kind_token!r}, expected T or R")
    try:
        event_id = int(parts[3])
    except ValueError:
        raise ValueError(f"bad event_id {parts[3]!r}")
    if len(parts) > base + 1:
        raise ValueError(f"too many fields ({len(parts)})")
    marks: frozenset[str] = frozenset()
    if len(parts) == base + 1:
        if not parts[base]:
            raise ValueError("empty marks field (omit the field instead)")
        tokens = parts[base].split(",")
        if any(not t for t in tokens):
            raise ValueError("empty mark token")
        marks = frozenset(tokens)
    return Event(event_id, ts, author, kind, orig_id, orig_author, marks)


def parse_event_log(lines: Iterable[str]) -> tuple[EventLog, ParseReport]:
    """Parse event TSV lines into a validated, sorted EventLog.

    Malformed lines and retweets with bad references are rejected individually
    and collected in the report; a duplicate event_id anywhere rejects the
    whole log with LogFormatError.
    """
    report = ParseReport()
    candidates: dict[int, tuple[int, str, Event]] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        try:
            ev = _parse_line(line_no, line)
        except ValueError as exc:
            report.rejects.append(LineReject(line_no, line, str(exc)))
            continue
        if ev.event_id in candidates:
            raise LogFormatError(
                f"duplicate event_id {ev.event_id} at lines "
                f"{candidates[ev.event_id][0]} and {line_no}"
            )
        candidates[ev.event_id] = (line_no, line, ev)

    # Retweet references are validated in global order so that a retweet of a
    # rejected line is itself rejected.
    accepted: dict[int, Event] = {}
    kept: list[Event] = []
    for line_no, line, ev in sorted(candidates.values(), key=lambda t: t[2].key):
        if ev.kind is EventKind.RETWEET:
            orig = accepted.get(ev.orig_event_id)
            if orig is None:
                report.rejects.append(
                    LineReject(line_no, line, f"retweet {ev.event_id} references unknown "
                                              f"or rejected event {ev.orig_event_id}")
                )
                continue
            if orig.key >= ev.key:
                report.rejects.append(
                    LineReject(line_no, line, f"retweet {ev.event_id} precedes its "
                                              f"original {orig.event_id} in time order")
                )
                continue
            if orig.author != ev.orig_author:
                report.rejects.append(
                    LineReject(line_no, line, f"retweet {ev.event_id} names author "
                                              f"{ev.orig_author!r} but event "
                                              f"{orig.event_id} was posted by {orig.author!r}")
                )
                continue
        accepted[ev.event_id] = ev
        kept.append(ev)
    return EventLog(kept), report


def in_flow_stream(
    user: str,
    log: EventLog,
    graph: SocialGraph,
    window: tuple[int, int],
    include_retweets: bool = True,
) -> InFlowStream:
    """Events authored by the user's followees inside the closed window, in log order.

    Retweets posted by followees count toward the in-flow by default (a retweet
    is a post like any other); pass include_retweets=False to restrict to
    original tweets.
    """
    if user not in graph:
        raise UnknownUserError(user)
    start, end = window
    out: list[Event] = []
    for v in graph.followees(user):
        evs = log.by_author(v)
        lo = bisect.bisect_left(evs, (start, -1), key=lambda e: e.key)
        for e in evs[lo:]:
            if e.ts > end:
                break
            if not include_retweets and e.kind is EventKind.RETWEET:
                continue
            out.append(e)
    out.sort(key=lambda e: e.key)
    return InFlowStream(user=user, window=window, events=tuple(out))


def active_users(log: EventLog, before_ts: int, min_events: int = 1) -> frozenset[str]:
    """Users with at least min_events events strictly before before_ts.

    Activity-filter predicate for restricting analyses to established accounts.
    """
    counts: dict[str, int] = {}
    for e in log:
        if e.ts >= before_ts:
            break
        counts[e.author] = counts.get(e.author, 0) + 1
    return frozenset(u for u, c in counts.items() if c >= min_events)
