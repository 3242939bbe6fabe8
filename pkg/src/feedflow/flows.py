"""Per-user rate statistics and population-level fits.

Rates are standardized internally to events/hour except the total out-flow,
which is reported in events/day to match the usual presentation of posting
volume. Population curves use logarithmic bins (10 per decade by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .events import EventKind, EventLog, InFlowStream, SocialGraph, in_flow_stream

SECONDS_PER_HOUR = 3600.0
HOURS_PER_DAY = 24.0


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class FlowStats:
    user: str
    lam: float          # in-flow rate, tweets/hour
    out_total: float    # out-flow rate, tweets/day (originals + retweets)
    lam_r: float        # in-flow rate due to tweets the user retweeted, tweets/hour
    lam_nr: float       # lam - lam_r
    beta_r: float       # retweets made / tweets received
    followees: int


def _window_hours(window: tuple[int, int]) -> float:
    start, end = window
    hours = (end - start) / SECONDS_PER_HOUR
    if hours <= 0:
        raise ValueError(f"window length must be positive, got {window}")
    return hours


def retweets_of_received(
    user: str,
    log: EventLog,
    graph: SocialGraph,
    window: tuple[int, int],
) -> list:
    """The user's retweets (inside window) whose original sits in her in-flow."""
    start, end = window
    followees = graph.followees(user)
    out = []
    for e in log.by_author(user):
        if e.ts < start or e.ts > end or e.kind is not EventKind.RETWEET:
            continue
        orig = log.get(e.orig_event_id)
        if orig is None:
            continue
        if orig.author in followees and start <= orig.ts <= end:
            out.append(e)
    return out


def compute_flow_stats(
    user: str,
    log: EventLog,
    graph: SocialGraph,
    window: tuple[int, int],
    include_retweets: bool = True,
    in_flow: Optional[InFlowStream] = None,
) -> FlowStats:
    """Rates and retweet probability for one user over the window.

    Pass a precomputed in_flow stream to avoid recomputing it when several
    statistics for the same user are needed.
    """
    hours = _window_hours(window)
    if in_flow is None:
        in_flow = in_flow_stream(user, log, graph, window, include_retweets=include_retweets)
    received = len(in_flow)
    start, end = window
    out_count = sum(1 for e in log.by_author(user) if start <= e.ts <= end)
    n_rt = len(retweets_of_received(user, log, graph, window))
    lam = received / hours
    lam_r = n_rt / hours
    beta_r = n_rt / received if received > 0 else 0.0
    return FlowStats(
        user=user,
        lam=lam,
        out_total=out_count / (hours / HOURS_PER_DAY),
        lam_r=lam_r,
        lam_nr=lam - lam_r,
        beta_r=beta_r,
        followees=len(graph.followees(user)),
    )


class EmpiricalDistribution:
    """Sorted sample with CCDF evaluation, P(X >= x)."""

    def __init__(self, samples: Sequence[float]):
        if len(samples) == 0:
            raise ValueError("empty sample")
        self.values = np.sort(np.asarray(samples, dtype=float))

    @property
    def n(self) -> int:
        return len(self.values)

    def ccdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        below = np.searchsorted(self.values, x, side="left")
        return (self.n - below) / self.n

    def ccdf_points(self) -> tuple[np.ndarray, np.ndarray]:
        uniq = np.unique(self.values)
        return uniq, self.ccdf(uniq)

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.values, q))

    def median(self) -> float:
        return float(np.median(self.values))

    def mean(self) -> float:
        return float(np.mean(self.values))


def ccdf_knee_loglog(dist: EmpiricalDistribution, n_grid: int = 60) -> float:
    """Knee of the CCDF: location of the maximum second difference in log-log.

    Descriptive only; reported, never asserted against.
    """
    pos = dist.values[dist.values > 0]
    if len(pos) < 3:
        raise ValueError("need at least 3 positive samples")
    lo, hi = pos[0], pos[-1]
    if lo == hi:
        return float(lo)
    grid = np.logspace(math.log10(lo), math.log10(hi), n_grid)
    cc = np.maximum(dist.ccdf(grid), 1.0 / dist.n)
    logc = np.log(cc)
    d2 = np.abs(np.diff(logc, 2))
    return float(grid[1 + int(np.argmax(d2))])


@dataclass(frozen=True)
class BinStat:
    lo: float
    hi: float
    center: float
    n: int
    mean: float
    median: float
    p10: float
    p90: float


def log_binned_curve(
    x: Sequence[float],
    y: Sequence[float],
    bins_per_decade: int = 10,
    min_count: int = 1,
) -> list[BinStat]:
    """Bin (x, y) pairs into logarithmic x-bins and summarize y per bin.

    Pairs with x <= 0 are dropped. Bin edges are aligned to powers of ten so
    the binning does not depend on the sample order or range jitter.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = x > 0
    x, y = x[keep], y[keep]
    if len(x) == 0:
        return []
    lo_exp = math.floor(math.log10(x.min()) * bins_per_decade)
    hi_exp = math.ceil(math.log10(x.max()) * bins_per_decade)
    idx = np.floor(np.log10(x) * bins_per_decade).astype(int)
    idx = np.clip(idx, lo_exp, hi_exp)
    out = []
    for b in range(lo_exp, hi_exp + 1):
        mask = idx == b
        n = int(mask.sum())
        if n < min_count:
            continue
        lo = 10 ** (b / bins_per_decade)
        hi = 10 ** ((b + 1) / bins_per_decade)
        ys = y[mask]
        out.append(
            BinStat(
                lo=lo,
                hi=hi,
                center=math.sqrt(lo * hi),
                n=n,
                mean=float(ys.mean()),
                median=float(np.median(ys)),
                p10=float(np.quantile(ys, 0.10)),
                p90=float(np.quantile(ys, 0.90)),
            )
        )
    return out


@dataclass(frozen=True)
class PowerLawFit:
    x_min: float
    alpha: float
    n: int


def fit_power_law_mle(samples: Sequence[float], x_min: float) -> PowerLawFit:
    """Continuous maximum-likelihood power-law exponent over samples >= x_min.

    alpha = 1 + n / sum(ln(x_i / x_min)).
    """
    if x_min <= 0:
        raise ValueError("x_min must be positive")
    x = np.asarray(samples, dtype=float)
    x = x[x >= x_min]
    n = len(x)
    if n < 2:
        raise DegenerateFitError(f"need at least 2 samples >= x_min, got {n}")
    s = float(np.log(x / x_min).sum())
    if s <= 0:
        raise DegenerateFitError("all samples equal x_min; exponent diverges")
    return PowerLawFit(x_min=x_min, alpha=1.0 + n / s, n=n)


@dataclass(frozen=True)
class TwoRegimeFit:
    lambda_c: float     # threshold in-flow, tweets/hour
    beta0: float        # plateau retweet probability
    gamma: float        # decay exponent above the threshold
    residual: float     # sum of squared log-residuals
    overload_detected: bool
    mle_exponent: Optional[float] = None  # Clauset-style check on the decay side


def _piecewise_lstsq(loglam: np.ndarray, logbeta: np.ndarray, logc: float):
    d = np.where(loglam > logc, loglam - logc, 0.0)
    A = np.column_stack([np.ones_like(loglam), -d])
    coef, _, _, _ = np.linalg.lstsq(A, logbeta, rcond=None)
    b0, gamma = coef
    resid = float(((A @ coef - logbeta) ** 2).sum())
    return b0, gamma, resid


def fit_two_regime(points: Sequence[tuple[float, float]]) -> TwoRegimeFit:
    """Fit beta(lam) = beta0 for lam <= lambda_c, beta0*(lam/lambda_c)^-gamma above.

    Least squares on log-log values over a grid of candidate thresholds taken
    from the observed bin positions; the curve is continuous at the threshold
    by construction. A non-positive best-fit decay means no overload regime
    was detected: the fit degrades to a flat plateau and the flag is cleared.
    """
    pts = [(l, b) for l, b in points if l > 0 and b > 0]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 positive bins, got {len(pts)}")
    lam = np.array([p[0] for p in pts])
    beta = np.array([p[1] for p in pts])
    order = np.argsort(lam)
    lam, beta = lam[order], beta[order]
    loglam, logbeta = np.log(lam), np.log(beta)

    best = None
    for logc in loglam[1:-1]:  # interior candidates: both regimes populated
        b0, gamma, resid = _piecewise_lstsq(loglam, logbeta, logc)
        if best is None or resid < best[3]:
            best = (logc, b0, gamma, resid)
    logc, b0, gamma, resid = best

    if gamma <= 0:
        # Flat or increasing curve: report the plateau only.
        b0_flat = float(logbeta.mean())
        resid_flat = float(((logbeta - b0_flat) ** 2).sum())
        return TwoRegimeFit(
            lambda_c=float(np.exp(logc)),
            beta0=min(1.0, float(np.exp(b0_flat))),
            gamma=0.0,
            residual=resid_flat,
            overload_detected=False,
        )

    mle_exp = None
    upper = lam[lam > np.exp(logc)]
    if len(upper) >= 2 and len(np.unique(upper)) > 1:
        mle_exp = fit_power_law_mle(upper, float(np.exp(logc))).alpha
    return TwoRegimeFit(
        lambda_c=float(np.exp(logc)),
        beta0=min(1.0, float(np.exp(b0))),
        gamma=float(gamma),
        residual=resid,
        overload_detected=True,
        mle_exponent=mle_exp,
    )


def diminishing_returns_check(
    points: Sequence[tuple[float, float]],
) -> tuple[bool, list[int]]:
    """Check concavity of binned means: per-unit increments must not increase.

    Returns (ok, indices of bins where the slope increased relative to the
    previous segment).
    """
    pts = sorted(points)
    if len(pts) < 3:
        raise ValueError(f"need at least 3 bins, got {len(pts)}")
    slopes = []
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x1 == x0:
            raise ValueError("duplicate bin position")
        slopes.append((y1 - y0) / (x1 - x0))
    violations = [i + 1 for i in range(1, len(slopes)) if slopes[i] > slopes[i - 1] + 1e-12]
    return (not violations, violations)
