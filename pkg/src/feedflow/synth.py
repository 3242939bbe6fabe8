"""Ground-truth workload generation.

Every estimator in the package gets its round-trip oracle from here: Poisson
posting per node, probabilistic forwarding driven by the same beta curve and
delay model the simulators use, and scripted contagion injection with a known
per-exposure adoption hazard.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .events import Event, EventKind, EventLog, SocialGraph
from .simulate import (
    BetaCurve,
    DelayModel,
    _IndexedGraph,
    beta_of_inflow,
    truncated_normal_rates,
)

SECONDS_PER_HOUR = 3600


@dataclass(frozen=True)
class ContagionPlan:
    token: str
    n_seeds: int
    hazard: float                       # per-exposure adoption probability
    overload_hazard: Optional[float] = None  # hazard above the in-flow threshold
    overload_threshold: Optional[float] = None
    adopt_jitter_s: int = 600           # adoption lag drawn uniformly from [1, this]

    def __post_init__(self):
        if not (0.0 <= self.hazard <= 1.0):
            raise ValueError("hazard must lie in [0, 1]")
        if self.adopt_jitter_s < 1:
            raise ValueError("adopt_jitter_s must be >= 1")
        if self.overload_hazard is not None and not (0.0 <= self.overload_hazard <= 1.0):
            raise ValueError("overload_hazard must lie in [0, 1]")
        if (self.overload_hazard is None) != (self.overload_threshold is None):
            raise ValueError("overload_hazard and overload_threshold go together")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")


@dataclass(frozen=True)
class WorkloadSpec:
    graph: SocialGraph
    beta_curve: BetaCurve
    delay_model: DelayModel
    horizon_hours: float
    seed: int
    mu: Optional[float] = None      # posting-rate model: Normal(mu, sigma), >= 0
    sigma: float = 0.0
    rates: Optional[dict[str, float]] = None  # explicit per-node rates instead
    contagions: tuple[ContagionPlan, ...] = ()
    forward_retweets: bool = False  # allow retweets-of-retweets (depth > 1)

    def __post_init__(self):
        if self.horizon_hours <= 0:
            raise ValueError("horizon must be positive")
        if (self.mu is None) == (self.rates is None):
            raise ValueError("specify exactly one of mu or explicit rates")


@dataclass
class _Raw:
    """Event under construction; final ids are assigned after the global sort."""

    ts: int
    depth: int  # originals sort before forwards at equal timestamps
    seq: int
    author: int
    kind: EventKind
    orig: Optional["_Raw"] = None
    marks: frozenset[str] = frozenset()
    event_id: int = -1


def _hazard_for(plan: ContagionPlan, lam_in: float) -> float:
    if plan.overload_threshold is not None and lam_in > plan.overload_threshold:
        return plan.overload_hazard
    return plan.hazard


def generate_workload(spec: WorkloadSpec) -> tuple[EventLog, dict]:
    """Generate an event log plus a ground-truth parameter report.

    Identical spec and seed give an identical log, byte for byte.
    """
    ig = _IndexedGraph(spec.graph)
    n = len(ig.nodes)
    rng = np.random.default_rng(spec.seed)
    horizon_s = int(round(spec.horizon_hours * SECONDS_PER_HOUR))

    if spec.rates is not None:
        missing = [u for u in ig.nodes if u not in spec.rates]
        if missing:
            raise ValueError(f"rates missing for nodes: {missing[:5]}")
        lam_out = np.array([spec.rates[u] for u in ig.nodes], dtype=float)
    else:
        lam_out = truncated_normal_rates(rng, spec.mu, spec.sigma, n)
    lam_in = np.array([lam_out[f].sum() for f in ig.followees])

    raw: list[_Raw] = []
    seq = 0

    def push(ts, depth, author, kind, orig=None, marks=frozenset()) -> _Raw:
        nonlocal seq
        r = _Raw(ts=ts, depth=depth, seq=seq, author=author, kind=kind,
                 orig=orig, marks=marks)
        seq += 1
        raw.append(r)
        return r

    # Poisson posting per node.
    tweets_by_author: list[list[_Raw]] = [[] for _ in range(n)]
    for i in range(n):
        count = rng.poisson(lam_out[i] * spec.horizon_hours)
        ts = np.sort(rng.integers(0, horizon_s + 1, size=count))
        for t in ts.tolist():
            tweets_by_author[i].append(push(t, 0, i, EventKind.TWEET))

    # Forwarding: each received post is forwarded with the beta-curve
    # probability after a delay from the receiver's in-flow bin.
    frontier: list[list[_Raw]] = tweets_by_author
    depth = 1
    while True:
        produced: list[list[_Raw]] = [[] for _ in range(n)]
        any_forward = False
        for u in range(n):
            incoming: list[_Raw] = []
            for v in ig.followees[u].tolist():
                incoming.extend(frontier[v])
            if not incoming:
                continue
            beta = beta_of_inflow(float(lam_in[u]), spec.beta_curve)
            mask = rng.random(len(incoming)) < beta
            hits = [e for e, m in zip(incoming, mask.tolist()) if m]
            if not hits:
                continue
            b = spec.delay_model.bin_for(float(lam_in[u]))
            delays = rng.lognormal(b.mu1, b.sigma1, len(hits)) + rng.lognormal(
                b.mu2, b.sigma2, len(hits)
            )
            for e, d in zip(hits, delays.tolist()):
                rt_ts = e.ts + int(round(d))
                if rt_ts > horizon_s:
                    continue
                produced[u].append(push(rt_ts, depth, u, EventKind.RETWEET, orig=e))
                any_forward = True
        if not spec.forward_retweets or not any_forward:
            break
        frontier = produced
        depth += 1

    # Contagion injection: each exposure (a followee's adoption) gives a
    # follower one independent chance to adopt after a short jittered delay.
    # The jitter keeps adoption waves from marching in lockstep, which would
    # pile simultaneous exposures onto single timestamps.
    truth_contagions = []
    for plan in spec.contagions:
        if plan.n_seeds > n:
            raise ValueError(f"plan {plan.token!r}: more seeds than nodes")
        seeds = rng.choice(n, size=plan.n_seeds, replace=False)
        # Seed adoption times are jittered across the first hour so that
        # exposure transitions do not pile up on a single timestamp.
        seed_ts = rng.integers(0, min(SECONDS_PER_HOUR, horizon_s) + 1, size=plan.n_seeds)
        adopted: set[int] = set()
        heap: list[tuple[int, int]] = [
            (int(t), int(s)) for t, s in zip(seed_ts, sorted(seeds))
        ]
        heapq.heapify(heap)
        while heap:
            t, u = heapq.heappop(heap)
            if u in adopted or t > horizon_s:
                continue
            adopted.add(u)
            push(t, 1, u, EventKind.TWEET, marks=frozenset({plan.token}))
            for w in ig.followers[u].tolist():
                if w in adopted:
                    continue
                if rng.random() < _hazard_for(plan, float(lam_in[w])):
                    lag = int(rng.integers(1, plan.adopt_jitter_s + 1))
                    heapq.heappush(heap, (t + lag, w))
        truth_contagions.append(
            {
                "token": plan.token,
                "n_seeds": plan.n_seeds,
                "hazard": plan.hazard,
                "overload_hazard": plan.overload_hazard,
                "overload_threshold": plan.overload_threshold,
                "n_adopters": len(adopted),
                "seeds": sorted(ig.nodes[s] for s in seeds.tolist()),
            }
        )

    raw.sort(key=lambda r: (r.ts, r.depth, r.seq))
    for event_id, r in enumerate(raw):
        r.event_id = event_id
    events = [
        Event(
            event_id=r.event_id,
            ts=r.ts,
            author=ig.nodes[r.author],
            kind=r.kind,
            orig_event_id=r.orig.event_id if r.orig is not None else None,
            orig_author=ig.nodes[r.orig.author] if r.orig is not None else None,
            marks=r.marks,
        )
        for r in raw
    ]

    truth = {
        "seed": spec.seed,
        "horizon_hours": spec.horizon_hours,
        "n_nodes": n,
        "n_edges": spec.graph.n_edges(),
        "n_events": len(events),
        "beta_curve": {
            "lambda_c": spec.beta_curve.lambda_c,
            "beta0": spec.beta_curve.beta0,
            "gamma": spec.beta_curve.gamma,
        },
        "delay_bins": [
            {
                "lo": b.lo, "hi": b.hi,
                "mu1": b.mu1, "sigma1": b.sigma1,
                "mu2": b.mu2, "sigma2": b.sigma2,
            }
            for b in spec.delay_model.bins
        ],
        "contagions": truth_contagions,
        "lam_out": {u: float(lam_out[i]) for i, u in enumerate(ig.nodes)},
        "lam_in": {u: float(lam_in[i]) for i, u in enumerate(ig.nodes)},
    }
    return EventLog(events), truth


def ground_truth_text(truth: dict) -> str:
    """Flatten the ground-truth report into sorted key = value lines."""
    lines: list[str] = []

    def emit(prefix: str, value):
        if isinstance(value, dict):
            for k in sorted(value):
                emit(f"{prefix}.{k}" if prefix else str(k), value[k])
        elif isinstance(value, (list, tuple)):
            for idx, item in enumerate(value):
                emit(f"{prefix}.{idx}", item)
        else:
            lines.append(f"{prefix} = {value}")

    emit("", truth)
    return "\n".join(lines) + "\n"
