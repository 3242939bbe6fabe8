"""Feed-queue reconstruction: positions at forward time, delays, and bounds.

The feed is modeled as a LIFO queue ordered by the global (ts, event_id)
order. The position of a post at the moment it was forwarded counts the
in-flow items that arrived strictly in between; forwards whose source is not
in the user's feed are excluded and surfaced in a coverage report.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .events import Event, EventKind, EventLog, InFlowStream, SocialGraph, in_flow_stream
from .flows import EmpiricalDistribution

SECONDS_PER_HOUR = 3600.0


class OriginalNotInFeedError(ValueError):
    pass


class FitConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class QueuePositionRecord:
    user: str
    retweet_id: int
    orig_id: int
    q: int          # in-flow arrivals strictly between the original and the forward
    delay_s: int    # ts(forward) - ts(original)


@dataclass
class CoverageReport:
    """How many forwards could be mapped onto the feed."""

    n_records: int = 0
    n_out_of_feed: int = 0

    @property
    def coverage(self) -> float:
        total = self.n_records + self.n_out_of_feed
        return self.n_records / total if total else 0.0


def queue_position_at_retweet(retweet: Event, in_flow: InFlowStream) -> QueuePositionRecord:
    """Queue position and delay for one forward against the user's in-flow.

    The forwarded original must itself be in the in-flow; otherwise the user
    found it outside her feed and the record is not a queue observation.
    """
    keys = [e.key for e in in_flow.events]
    ids = {e.event_id for e in in_flow.events}
    if retweet.orig_event_id not in ids:
        raise OriginalNotInFeedError(
            f"event {retweet.orig_event_id} is not in the in-flow of {in_flow.user!r}"
        )
    orig = next(e for e in in_flow.events if e.event_id == retweet.orig_event_id)
    lo = bisect.bisect_right(keys, orig.key)
    hi = bisect.bisect_left(keys, retweet.key)
    return QueuePositionRecord(
        user=in_flow.user,
        retweet_id=retweet.event_id,
        orig_id=orig.event_id,
        q=max(0, hi - lo),
        delay_s=retweet.ts - orig.ts,
    )


def queue_positions(
    user: str,
    log: EventLog,
    graph: SocialGraph,
    window: tuple[int, int],
    source: str = "immediate",
    in_flow: Optional[InFlowStream] = None,
) -> tuple[list[QueuePositionRecord], CoverageReport]:
    """All queue-position records for one user's forwards inside the window.

    source="immediate" measures against the event the user actually forwarded
    (her feed item); source="root" follows forward chains back to the original
    post and measures against that.
    """
    if source not in ("immediate", "root"):
        raise ValueError(f"source must be 'immediate' or 'root', got {source!r}")
    if in_flow is None:
        in_flow = in_flow_stream(user, log, graph, window)
    keys = [e.key for e in in_flow.events]
    by_id = {e.event_id: e for e in in_flow.events}
    start, end = window
    records: list[QueuePositionRecord] = []
    report = CoverageReport()
    for e in log.by_author(user):
        if e.kind is not EventKind.RETWEET or e.ts < start or e.ts > end:
            continue
        target_id = e.orig_event_id
        if source == "root":
            seen = set()
            cur = log.get(target_id)
            while cur is not None and cur.kind is EventKind.RETWEET and cur.event_id not in seen:
                seen.add(cur.event_id)
                cur = log.get(cur.orig_event_id)
            if cur is not None:
                target_id = cur.event_id
        orig = by_id.get(target_id)
        if orig is None:
            report.n_out_of_feed += 1
            continue
        lo = bisect.bisect_right(keys, orig.key)
        hi = bisect.bisect_left(keys, e.key)
        records.append(
            QueuePositionRecord(
                user=user,
                retweet_id=e.event_id,
                orig_id=orig.event_id,
                q=max(0, hi - lo),
                delay_s=e.ts - orig.ts,
            )
        )
        report.n_records += 1
    return records, report


@dataclass(frozen=True)
class DelaySummary:
    n: int
    median_s: float
    bottom90_mean_s: float  # mean of delays at or below the 90th percentile


def delay_histogram(delays: Sequence[float]) -> tuple[EmpiricalDistribution, DelaySummary]:
    """Pooled delay distribution for a user group plus the headline statistics."""
    if len(delays) == 0:
        raise ValueError("empty delay group")
    dist = EmpiricalDistribution(delays)
    p90 = dist.quantile(0.90)
    low = dist.values[dist.values <= p90]
    return dist, DelaySummary(
        n=dist.n,
        median_s=dist.median(),
        bottom90_mean_s=float(low.mean()),
    )


@dataclass(frozen=True)
class LognormalConvolutionFit:
    """Sum of an observation-time and a reaction-time lognormal."""

    mu1: float
    sigma1: float
    mu2: float
    sigma2: float
    loglik: float
    n: int
    n_rejected: int = 0  # non-positive delays dropped before fitting


def _lognormal_pdf(x: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    xv = x[pos]
    out[pos] = np.exp(-((np.log(xv) - mu) ** 2) / (2 * sigma**2)) / (
        xv * sigma * math.sqrt(2 * math.pi)
    )
    return out


def lognormal_sum_density(
    z,
    mu1: float,
    sigma1: float,
    mu2: float,
    sigma2: float,
    n_grid: int = 1 << 16,
    zmax: Optional[float] = None,
) -> np.ndarray:
    """Density of exp(N(mu1,sigma1)) + exp(N(mu2,sigma2)).

    Evaluated by FFT convolution of the two component densities on a fine
    uniform grid; beyond the grid the far tail is approximated by the sum of
    the component tails, which is the exact leading-order behavior for sums
    of heavy-tailed variables.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if zmax is None:
        zmax = float(z.max()) * 1.05 if z.size else 1.0
    dz = zmax / n_grid
    xs = (np.arange(n_grid) + 0.5) * dz
    fx = _lognormal_pdf(xs, mu1, sigma1) * dz
    fy = _lognormal_pdf(xs, mu2, sigma2) * dz
    conv = np.fft.irfft(np.fft.rfft(fx, 2 * n_grid) * np.fft.rfft(fy, 2 * n_grid))
    # Mass at index m corresponds to z = (m + 1) * dz (midpoint grid sums).
    grid_z = (np.arange(2 * n_grid) + 1.0) * dz
    dens_grid = np.maximum(conv, 0.0) / dz
    out = np.interp(z, grid_z, dens_grid, left=0.0)
    tail = z > zmax
    if tail.any():
        out[tail] = _lognormal_pdf(z[tail], mu1, sigma1) + _lognormal_pdf(
            z[tail], mu2, sigma2
        )
    return out


def _neg_loglik(params: np.ndarray, samples: np.ndarray, zmax: float) -> float:
    mu1, log_s1, mu2, log_s2 = params
    s1, s2 = math.exp(log_s1), math.exp(log_s2)
    dens = lognormal_sum_density(samples, mu1, s1, mu2, s2, zmax=zmax)
    return -float(np.log(np.maximum(dens, 1e-300)).sum())


def fit_lognormal_convolution(
    delays: Sequence[float],
    min_samples: int = 100,
    max_iter: int = 4000,
) -> LognormalConvolutionFit:
    """Maximum-likelihood fit of a sum of two lognormals to delay samples.

    The sum density is evaluated by numerical convolution (FFT on a fine
    uniform grid) and maximized with Nelder-Mead from several moment-based
    starting points. Components are reported with mu1 >= mu2 (the slower one
    first).
    """
    d = np.asarray(delays, dtype=float)
    n_rejected = int((d <= 0).sum())
    d = d[d > 0]
    if len(d) < min_samples:
        raise ValueError(
            f"need at least {min_samples} positive samples, got {len(d)} "
            f"({n_rejected} non-positive rejected)"
        )
    # The grid covers the bulk at full resolution; samples beyond it fall back
    # to the asymptotic tail density inside lognormal_sum_density.
    zmax = float(np.quantile(d, 0.999)) * 4.0
    m = float(np.mean(np.log(d)))
    s = float(np.std(np.log(d)))
    s = max(s, 0.05)
    starts = [
        (m - 0.2, math.log(s), m - 1.5, math.log(s)),
        (m - 0.7, math.log(s * 1.2), m - 0.7, math.log(s * 0.6)),
        (m - 0.1, math.log(s * 0.7), m - 2.5, math.log(s * 1.5)),
        (m - 1.0, math.log(s), m - 1.0, math.log(s)),
    ]
    best = None
    for x0 in starts:
        res = minimize(
            _neg_loglik,
            np.array(x0),
            args=(d, zmax),
            method="Nelder-Mead",
            options={"maxiter": max_iter, "xatol": 1e-4, "fatol": 1e-6},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise FitConvergenceError("optimizer failed to produce a finite likelihood")
    if not best.success and best.fun > _neg_loglik(np.array(starts[0]), d, zmax):
        raise FitConvergenceError(f"optimizer did not converge: {best.message}")
    mu1, log_s1, mu2, log_s2 = best.x
    s1, s2 = math.exp(log_s1), math.exp(log_s2)
    if mu2 > mu1:
        mu1, s1, mu2, s2 = mu2, s2, mu1, s1
    return LognormalConvolutionFit(
        mu1=float(mu1), sigma1=float(s1),
        mu2=float(mu2), sigma2=float(s2),
        loglik=-float(best.fun), n=len(d), n_rejected=n_rejected,
    )


def sample_lognormal_sum(
    rng: np.random.Generator,
    mu1: float,
    sigma1: float,
    mu2: float,
    sigma2: float,
    size: int,
) -> np.ndarray:
    return rng.lognormal(mu1, sigma1, size) + rng.lognormal(mu2, sigma2, size)


@dataclass(frozen=True)
class LittleBound:
    """Lower bounds on reading delays from the feed balance N = lam * delay.

    All rates in events/hour, delays in hours. n_r (the mean queue position at
    forward time) lower-bounds the mean number of unread items, which is what
    makes the derived delays lower bounds.
    """

    lam: float
    lam_r: float
    lam_nr: float
    delta_r: float       # mean observed forward delay
    n_r: float           # mean queue position at forward time
    delta_nr_star: float  # lower bound on the mean non-forward reading delay
    delta_star: float     # lower bound on the mean overall reading delay
    clamped: bool         # n_r too small to bound; delta_nr_star clamped to 0


def little_bounds(lam: float, lam_r: float, delta_r: float, n_r: float) -> LittleBound:
    """Bound the non-forward and overall reading delays for one user or bin."""
    if delta_r < 0 or n_r < 0:
        raise ValueError("delta_r and n_r must be non-negative")
    lam_nr = lam - lam_r
    if lam_nr <= 0:
        raise ValueError("no non-forwarded traffic (lam_nr must be positive)")
    raw = (n_r - lam_r * delta_r) / lam_nr
    clamped = raw < 0
    delta_nr_star = max(0.0, raw)
    delta_star = (lam_r * delta_r + lam_nr * delta_nr_star) / lam
    return LittleBound(
        lam=lam,
        lam_r=lam_r,
        lam_nr=lam_nr,
        delta_r=delta_r,
        n_r=n_r,
        delta_nr_star=delta_nr_star,
        delta_star=delta_star,
        clamped=clamped,
    )
