"""Shared test utilities: random log construction and brute-force oracles."""

from __future__ import annotations

import numpy as np

from feedflow.events import Event, EventKind, EventLog, SocialGraph


def random_graph(rng: np.random.Generator, n_users: int, p_edge: float = 0.4) -> SocialGraph:
    users = [f"u{i}" for i in range(n_users)]
    edges = [
        (a, b)
        for a in users
        for b in users
        if a != b and rng.random() < p_edge
    ]
    return SocialGraph(edges, nodes=users)


def random_log(
    rng: np.random.Generator,
    graph: SocialGraph,
    n_events: int,
    retweet_prob: float = 0.4,
    t_max: int = 10_000,
) -> EventLog:
    """Valid random event log: retweets always reference an earlier in-flow event.

    Event ids are assigned in creation order with non-decreasing timestamps, so
    orig.key < retweet.key holds by construction.
    """
    users = sorted(graph.nodes)
    ts_values = np.sort(rng.integers(0, t_max, size=n_events))
    events: list[Event] = []
    by_author: dict[str, list[Event]] = {u: [] for u in users}
    for event_id, ts in enumerate(ts_values.tolist()):
        author = users[rng.integers(len(users))]
        candidates = []
        if rng.random() < retweet_prob:
            for v in graph.followees(author):
                candidates.extend(by_author[v])
        if candidates:
            orig = candidates[rng.integers(len(candidates))]
            # Forward chains collapse to the feed item actually forwarded.
            ev = Event(event_id, int(ts), author, EventKind.RETWEET,
                       orig_event_id=orig.event_id, orig_author=orig.author)
        else:
            ev = Event(event_id, int(ts), author, EventKind.TWEET)
        events.append(ev)
        by_author[author].append(ev)
    return EventLog(events)


def naive_queue_positions(
    user: str,
    log: EventLog,
    graph: SocialGraph,
    window: tuple[int, int],
) -> tuple[dict[int, int], int]:
    """O(n^2) queue positions for a user's forwards; oracle for the fast path.

    Returns ({retweet_id: q}, n_out_of_feed) under the immediate-source rule
    with retweets included in the in-flow.
    """
    start, end = window
    followees = graph.followees(user)
    feed = [
        e for e in log
        if e.author in followees and start <= e.ts <= end
    ]
    positions: dict[int, int] = {}
    out_of_feed = 0
    for r in log.by_author(user):
        if r.kind is not EventKind.RETWEET or r.ts < start or r.ts > end:
            continue
        orig = next((e for e in feed if e.event_id == r.orig_event_id), None)
        if orig is None:
            out_of_feed += 1
            continue
        q = sum(1 for e in feed if orig.key < e.key < r.key)
        positions[r.event_id] = q
    return positions, out_of_feed


def reachable_followers(graph: SocialGraph, seeds: set[str]) -> set[str]:
    """Transitive closure along follower edges (the direction cascades travel)."""
    seen = set(seeds)
    frontier = list(seeds)
    while frontier:
        u = frontier.pop()
        for w in graph.followers(u):
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    return seen
