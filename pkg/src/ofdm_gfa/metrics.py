"""Error rate and threshold selection for continuous activity scores."""

from __future__ import annotations

import numpy as np

EDGE_EPS = 1e-9


def error_rate(decisions, truth) -> float:
    """Fraction of devices whose decision differs from the truth."""
    d = np.asarray(decisions)
    t = np.asarray(truth)
    if d.shape != t.shape:
        raise ValueError(f"length mismatch: {d.shape} vs {t.shape}")
    if d.size == 0:
        raise ValueError("empty decision vector")
    return float(np.count_nonzero((d != 0) != (t != 0)) / d.size)


def decide(scores, threshold: float) -> np.ndarray:
    return (np.asarray(scores) > threshold).astype(np.int8)


def optimize_threshold(score_sets, truths) -> tuple[float, float]:
    """Threshold minimizing the trial-averaged error rate.

    Candidates are the midpoints between adjacent distinct pooled scores
    plus one threshold below and one above every score; a device counts as
    active when its score exceeds the threshold.  Ties go to the smallest
    threshold.  Returns ``(threshold, mean error rate)``.
    """
    scores = [np.asarray(s, dtype=float).ravel() for s in score_sets]
    truths = [np.asarray(t).ravel() != 0 for t in truths]
    if not scores:
        raise ValueError("need at least one trial")
    if len(scores) != len(truths):
        raise ValueError("score and truth counts differ")
    # each trial's errors enter the mean with weight 1/(T * N_t)
    weights = np.concatenate([np.full(s.size, 1.0 / (len(scores) * s.size)) for s in scores])
    pooled = np.concatenate(scores)
    act = np.concatenate(truths)

    uniq = np.unique(pooled)
    lo = min(0.0, uniq[0]) - EDGE_EPS
    hi = max(1.0, uniq[-1]) + EDGE_EPS
    cands = np.concatenate([[lo], 0.5 * (uniq[:-1] + uniq[1:]), [hi]])

    # with threshold c: misses = actives with score <= c, false alarms = inactives above c
    order = np.argsort(pooled, kind="stable")
    s_sorted = pooled[order]
    w_act = np.where(act[order], weights[order], 0.0)
    w_inact = np.where(act[order], 0.0, weights[order])
    cum_act = np.concatenate([[0.0], np.cumsum(w_act)])
    cum_inact = np.concatenate([[0.0], np.cumsum(w_inact)])
    k = np.searchsorted(s_sorted, cands, side="right")
    err = cum_act[k] + (cum_inact[-1] - cum_inact[k])
    best = int(np.argmin(err))  # argmin returns the first, i.e. smallest threshold
    return float(cands[best]), float(err[best])
