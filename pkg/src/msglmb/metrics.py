"""OSPA and OSPA(2) evaluation of point-set and trajectory-set error."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ModelError


def _check_params(c: float, p: float):
    if not c > 0:
        raise ModelError("OSPA cutoff c must be positive")
    if not p >= 1:
        raise ModelError("OSPA order p must be at least 1")


def _ospa_core(D: np.ndarray, c: float, p: float) -> tuple[float, float, float]:
    """OSPA total/localization/cardinality from a cut base-distance matrix."""
    n, m = D.shape
    if n == 0 and m == 0:
        return 0.0, 0.0, 0.0
    if n == 0 or m == 0:
        return float(c), 0.0, float(c)
    cost = D**p
    row, col = linear_sum_assignment(cost)
    loc_p = float(cost[row, col].sum())
    denom = max(n, m)
    card_p = float(c) ** p * abs(n - m)
    total = ((loc_p + card_p) / denom) ** (1.0 / p)
    loc = (loc_p / denom) ** (1.0 / p)
    card = (card_p / denom) ** (1.0 / p)
    return float(total), float(loc), float(card)


def ospa(X, Y, c: float = 100.0, p: float = 1.0) -> tuple[float, float, float]:
    """Optimal subpattern assignment distance between two point sets.

    Distances are cut at c, unmatched points cost c, and the p-norm average
    is reported as (total, localization component, cardinality component).
    The assignment is solved exactly, which the metric properties require.
    """
    _check_params(c, p)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.size == 0:
        X = X.reshape(0, Y.shape[1] if Y.ndim == 2 and Y.size else 1)
    if Y.size == 0:
        Y = Y.reshape(0, X.shape[1] if X.ndim == 2 and X.size else 1)
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    if X.shape[0] and Y.shape[0]:
        diff = X[:, None, :] - Y[None, :, :]
        D = np.minimum(c, np.sqrt((diff**2).sum(axis=2)))
    else:
        D = np.zeros((X.shape[0], Y.shape[0]))
    return _ospa_core(D, c, p)


Track = Mapping[int, np.ndarray]


def _track_base_distance(x: Track, y: Track, window: Sequence[int], c: float) -> float:
    """Time-averaged cut distance between two tracks over a window.

    Scans where exactly one track exists count c; scans where neither
    exists are skipped (the average runs over the union of their supports).
    """
    total = 0.0
    count = 0
    for t in window:
        in_x = t in x
        in_y = t in y
        if not in_x and not in_y:
            continue
        count += 1
        if in_x and in_y:
            total += min(c, float(np.linalg.norm(np.asarray(x[t]) - np.asarray(y[t]))))
        else:
            total += c
    if count == 0:
        return 0.0
    return total / count


def ospa2(
    est_tracks: Mapping,
    true_tracks: Mapping,
    c: float = 100.0,
    p: float = 1.0,
    window: int = 10,
    scans: Sequence[int] | None = None,
) -> list[tuple[int, float, float, float]]:
    """Per-scan OSPA over trajectory segments in a lagging window.

    Tracks map an identifier to {scan: state vector}.  At scan k the metric
    compares the tracks restricted to scans {k-window+1 .. k} using the
    time-averaged cut distance as the base distance.  Returns one
    (scan, total, localization, cardinality) row per evaluated scan.
    """
    _check_params(c, p)
    if window < 1:
        raise ModelError("OSPA(2) window must be at least 1")
    if scans is None:
        all_scans = sorted(
            {t for trk in est_tracks.values() for t in trk}
            | {t for trk in true_tracks.values() for t in trk}
        )
        if not all_scans:
            return []
        scans = range(min(all_scans), max(all_scans) + 1)
    rows = []
    for k in scans:
        win = range(k - window + 1, k + 1)
        est = [trk for trk in est_tracks.values() if any(t in trk for t in win)]
        tru = [trk for trk in true_tracks.values() if any(t in trk for t in win)]
        D = np.empty((len(est), len(tru)))
        for i, x in enumerate(est):
            for j, y in enumerate(tru):
                D[i, j] = _track_base_distance(x, y, win, c)
        rows.append((int(k),) + _ospa_core(D, c, p))
    return rows
