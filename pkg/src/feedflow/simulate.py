"""Cascade simulation under background traffic.

Two propagation models share the same adoption probability machinery: a
discrete independent-cascade variant (sizes) and a continuous-time variant
(adoption times and durations). Background traffic enters through each node's
in-flow rate, which scales down its adoption probability past the overload
threshold and selects its processing-delay distribution.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .events import SocialGraph
from .flows import EmpiricalDistribution


class DelayBinError(ValueError):
    pass


@dataclass(frozen=True)
class BetaCurve:
    """Plateau-then-power-law adoption probability against in-flow rate."""

    lambda_c: float
    beta0: float
    gamma: float

    def __post_init__(self):
        if self.lambda_c <= 0:
            raise ValueError("lambda_c must be positive")
        if not (0.0 < self.beta0 <= 1.0):
            raise ValueError("beta0 must lie in (0, 1]")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


def beta_of_inflow(lam_in: float, curve: BetaCurve) -> float:
    """Adoption probability for a node receiving lam_in tweets/hour."""
    if lam_in < 0:
        raise ValueError("in-flow rate must be non-negative")
    if lam_in <= curve.lambda_c:
        return curve.beta0
    return min(1.0, curve.beta0 * (lam_in / curve.lambda_c) ** (-curve.gamma))


@dataclass(frozen=True)
class DelayBin:
    lo: float
    hi: float  # math.inf for the last bin
    mu1: float
    sigma1: float
    mu2: float
    sigma2: float


@dataclass(frozen=True)
class DelayModel:
    """In-flow-binned lognormal-sum processing delays; bins must cover (0, inf)."""

    bins: tuple[DelayBin, ...]

    def __post_init__(self):
        bins = sorted(self.bins, key=lambda b: b.lo)
        if not bins:
            raise DelayBinError("delay model needs at least one bin")
        if bins[0].lo > 0:
            raise DelayBinError("delay bins must start at 0")
        for a, b in zip(bins, bins[1:]):
            if b.lo != a.hi:
                raise DelayBinError(f"gap or overlap between bins at {a.hi} and {b.lo}")
        if not math.isinf(bins[-1].hi):
            raise DelayBinError("last delay bin must extend to infinity")
        object.__setattr__(self, "bins", tuple(bins))

    def bin_for(self, lam_in: float) -> DelayBin:
        for b in self.bins:
            if b.lo <= lam_in < b.hi:
                return b
        raise DelayBinError(f"no delay bin covers in-flow rate {lam_in}")

    def sample(self, rng: np.random.Generator, lam_in: float) -> float:
        b = self.bin_for(lam_in)
        return float(rng.lognormal(b.mu1, b.sigma1) + rng.lognormal(b.mu2, b.sigma2))


@dataclass(frozen=True)
class SimConfig:
    mu: float                 # mean node out-flow rate, tweets/hour
    sigma: float              # out-flow std; defaults to mu/4 when None in helpers
    beta_curve: BetaCurve
    n_cascades: int
    seed: int
    delay_model: Optional[DelayModel] = None  # required by the continuous model
    max_time: float = math.inf

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.n_cascades < 1:
            raise ValueError("n_cascades must be >= 1")


@dataclass(frozen=True)
class CascadeRecord:
    cascade_id: int
    seed_node: str
    adopters: frozenset[str]
    times: Optional[dict[str, float]]  # adoption times (continuous model only)
    size: int
    duration: float


class _IndexedGraph:
    """Array view of a SocialGraph for the simulation hot path."""

    def __init__(self, graph: SocialGraph):
        self.nodes = sorted(graph.nodes)
        self.index = {u: i for i, u in enumerate(self.nodes)}
        self.followees = [
            np.array(sorted(self.index[v] for v in graph.followees(u)), dtype=np.int64)
            for u in self.nodes
        ]
        self.followers = [
            np.array(sorted(self.index[v] for v in graph.followers(u)), dtype=np.int64)
            for u in self.nodes
        ]


def truncated_normal_rates(
    rng: np.random.Generator, mu: float, sigma: float, size: int
) -> np.ndarray:
    """Normal(mu, sigma) draws with negatives resampled (rates must be >= 0)."""
    rates = rng.normal(mu, sigma, size)
    while True:
        bad = rates < 0
        if not bad.any():
            return rates
        rates[bad] = rng.normal(mu, sigma, int(bad.sum()))


def assign_rates(
    graph: SocialGraph, mu: float, sigma: float, seed: int
) -> tuple[dict[str, float], dict[str, float]]:
    """Per-node out-flow draws and the induced in-flow sums.

    A node's in-flow is the sum of the out-flows of the nodes it follows.
    """
    if not graph.nodes:
        raise ValueError("empty graph")
    ig = _IndexedGraph(graph)
    rng = np.random.default_rng(seed)
    lam_out = truncated_normal_rates(rng, mu, sigma, len(ig.nodes))
    lam_in = np.array([lam_out[f].sum() for f in ig.followees])
    return (
        {u: float(lam_out[i]) for i, u in enumerate(ig.nodes)},
        {u: float(lam_in[i]) for i, u in enumerate(ig.nodes)},
    )


ActivationFn = Callable[[str, str], bool]


def _cascade_rng(seed: int, cascade_id: int) -> np.random.Generator:
    # Keyed per cascade so results do not depend on execution schedule.
    return np.random.default_rng([seed, cascade_id])


def _prepare(graph: SocialGraph, config: SimConfig):
    ig = _IndexedGraph(graph)
    rng = np.random.default_rng(config.seed)
    lam_out = truncated_normal_rates(rng, config.mu, config.sigma, len(ig.nodes))
    lam_in = np.array([lam_out[f].sum() for f in ig.followees])
    beta = np.array([beta_of_inflow(l, config.beta_curve) for l in lam_in])
    return ig, lam_in, beta


def _run_ic_cascade(
    cascade_id: int,
    ig: _IndexedGraph,
    beta: np.ndarray,
    config: SimConfig,
    activation: Optional[ActivationFn],
) -> CascadeRecord:
    rng = _cascade_rng(config.seed, cascade_id)
    seed_node = int(rng.integers(len(ig.nodes)))
    adopted = np.zeros(len(ig.nodes), dtype=bool)
    adopted[seed_node] = True
    frontier = [seed_node]
    while frontier:
        nxt: list[int] = []
        for i in frontier:
            for j in ig.followers[i].tolist():
                if adopted[j]:
                    continue
                if activation is not None:
                    hit = activation(ig.nodes[i], ig.nodes[j])
                else:
                    hit = rng.random() < beta[j]
                if hit:
                    adopted[j] = True
                    nxt.append(j)
        frontier = nxt
    members = frozenset(ig.nodes[i] for i in np.flatnonzero(adopted))
    return CascadeRecord(
        cascade_id=cascade_id,
        seed_node=ig.nodes[seed_node],
        adopters=members,
        times=None,
        size=len(members),
        duration=0.0,
    )


def _run_indexed(run_one, n: int, workers: int) -> list:
    """Run cascades 0..n-1, optionally on a thread pool, in index order.

    Each cascade owns an RNG stream keyed by its index, so the result is
    independent of the execution schedule and worker count.
    """
    if workers <= 1:
        return [run_one(c) for c in range(n)]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, range(n)))


def simulate_ic_bg(
    graph: SocialGraph,
    config: SimConfig,
    activation: Optional[ActivationFn] = None,
    workers: int = 1,
) -> list[CascadeRecord]:
    """Independent-cascade simulation with in-flow-dependent adoption probability.

    Synchronous rounds from a uniform random seed node; each newly adopted node
    attempts each follower exactly once. Pass an activation callable to pin the
    per-edge Bernoulli outcomes (used by the model-agreement oracle).
    """
    ig, _, beta = _prepare(graph, config)
    return _run_indexed(
        lambda c: _run_ic_cascade(c, ig, beta, config, activation),
        config.n_cascades,
        workers,
    )


def _run_ct_cascade(
    cascade_id: int,
    ig: _IndexedGraph,
    lam_in: np.ndarray,
    beta: np.ndarray,
    config: SimConfig,
    activation: Optional[ActivationFn],
) -> CascadeRecord:
    rng = _cascade_rng(config.seed, cascade_id)
    seed_node = int(rng.integers(len(ig.nodes)))
    times: dict[int, float] = {}
    heap: list[tuple[float, int]] = [(0.0, seed_node)]
    while heap:
        t, i = heapq.heappop(heap)
        if i in times:
            continue
        times[i] = t
        for j in ig.followers[i].tolist():
            if j in times:
                continue
            if activation is not None:
                hit = activation(ig.nodes[i], ig.nodes[j])
            else:
                hit = rng.random() < beta[j]
            if not hit:
                continue
            delay = config.delay_model.sample(rng, float(lam_in[j]))
            when = t + delay
            if when <= config.max_time:
                heapq.heappush(heap, (when, j))
    named = {ig.nodes[i]: t for i, t in times.items()}
    return CascadeRecord(
        cascade_id=cascade_id,
        seed_node=ig.nodes[seed_node],
        adopters=frozenset(named),
        times=named,
        size=len(named),
        duration=max(named.values()),
    )


def simulate_ct_bg(
    graph: SocialGraph,
    config: SimConfig,
    activation: Optional[ActivationFn] = None,
    workers: int = 1,
) -> list[CascadeRecord]:
    """Continuous-time cascade simulation with in-flow-binned processing delays.

    A node's adoption time is the minimum over its adopting parents' activation
    times plus a delay drawn from the bin of its in-flow rate; the run is
    truncated at max_time.
    """
    if config.delay_model is None:
        raise DelayBinError("continuous model requires a delay_model")
    ig, lam_in, beta = _prepare(graph, config)
    return _run_indexed(
        lambda c: _run_ct_cascade(c, ig, lam_in, beta, config, activation),
        config.n_cascades,
        workers,
    )


@dataclass(frozen=True)
class DistributionReport:
    size_ccdf: tuple[tuple[float, float], ...]      # (size, P(S >= size))
    duration_ccdf: tuple[tuple[float, float], ...]  # over cascades of size >= 2
    n_records: int
    n_multi: int                                    # cascades with >= 2 nodes
    duration_empty: bool

    def frac_size_at_least(self, size: float) -> float:
        candidates = [c for v, c in self.size_ccdf if v >= size]
        return max(candidates) if candidates else 0.0


def distribution_report(records: Sequence[CascadeRecord]) -> DistributionReport:
    """CCDF tables of cascade size and duration.

    Size-1 cascades are included in the size CCDF denominator; the duration
    CCDF covers only cascades with 2 or more nodes (a single-node cascade has
    no propagation to time).
    """
    if not records:
        raise ValueError("no cascade records")
    sizes = EmpiricalDistribution([r.size for r in records])
    size_vals, size_cc = sizes.ccdf_points()
    multi = [r.duration for r in records if r.size >= 2]
    if multi:
        durs = EmpiricalDistribution(multi)
        dur_vals, dur_cc = durs.ccdf_points()
        dur_table = tuple(zip(dur_vals.tolist(), dur_cc.tolist()))
    else:
        dur_table = ()
    return DistributionReport(
        size_ccdf=tuple(zip(size_vals.tolist(), size_cc.tolist())),
        duration_ccdf=dur_table,
        n_records=len(records),
        n_multi=len(multi),
        duration_empty=not multi,
    )
