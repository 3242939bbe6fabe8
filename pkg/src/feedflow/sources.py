"""Retweet-source-set statistics and the two-regime source growth fit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .events import EventKind, EventLog, SocialGraph, UnknownUserError


@dataclass(frozen=True)
class SourceStats:
    user: str
    followees: int      # F
    source_set: int     # S_r: distinct followees the user forwarded from
    p_src: float        # S_r / F
    out_of_feed: int    # forwards whose original author is not followed


def source_stats(
    user: str,
    log: EventLog,
    graph: SocialGraph,
    window: tuple[int, int],
) -> SourceStats:
    """Distinct forwarded-from followees over the window.

    Forwards of non-followees do not enter the source set (the feed queue only
    carries followee traffic); their count is reported separately since it
    indicates information found outside the feed.
    """
    if user not in graph:
        raise UnknownUserError(user)
    followees = graph.followees(user)
    start, end = window
    sources: set[str] = set()
    out_of_feed = 0
    for e in log.by_author(user):
        if e.kind is not EventKind.RETWEET or e.ts < start or e.ts > end:
            continue
        if e.orig_author in followees:
            sources.add(e.orig_author)
        else:
            out_of_feed += 1
    f = len(followees)
    return SourceStats(
        user=user,
        followees=f,
        source_set=len(sources),
        p_src=len(sources) / f if f else 0.0,
        out_of_feed=out_of_feed,
    )


@dataclass(frozen=True)
class SourceRegimeFit:
    exponent_low: float   # growth exponent below the breakpoint
    exponent_high: float  # growth exponent above the breakpoint
    f_c: float            # breakpoint followee count
    residual: float
    identifiable: bool    # False when both exponents coincide (single power law)


def fit_source_regimes(
    points: Sequence[tuple[float, float]],
    tol: float = 0.05,
) -> SourceRegimeFit:
    """Piecewise log-log linear fit of mean source-set size against followees.

    The two segments are constrained to meet at the breakpoint; the breakpoint
    is chosen from the interior bin positions by least squares. When the two
    exponents agree within tol the breakpoint is flagged unidentifiable.
    """
    pts = [(f, s) for f, s in points if f > 0 and s > 0]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 positive bins, got {len(pts)}")
    f = np.array(sorted(p[0] for p in pts))
    s = np.array([p[1] for p in sorted(pts)])
    logf, logs = np.log(f), np.log(s)

    best = None
    for logc in logf[1:-1]:
        d = logf - logc
        A = np.column_stack(
            [np.ones_like(logf), np.where(d <= 0, d, 0.0), np.where(d > 0, d, 0.0)]
        )
        coef, _, _, _ = np.linalg.lstsq(A, logs, rcond=None)
        resid = float(((A @ coef - logs) ** 2).sum())
        if best is None or resid < best[2]:
            best = (logc, coef, resid)
    logc, (_, e_low, e_high), resid = best
    return SourceRegimeFit(
        exponent_low=float(e_low),
        exponent_high=float(e_high),
        f_c=float(np.exp(logc)),
        residual=resid,
        identifiable=abs(e_low - e_high) > tol,
    )
