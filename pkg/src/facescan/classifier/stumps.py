"""Weighted decision stumps over feature values.

A stump predicts ``polarity`` when value >= threshold and ``-polarity``
otherwise. The trainer sweeps sorted values once, evaluating every split
boundary for both polarities; ties go to the smaller threshold, then to
polarity +1. ``best_stump`` runs the same sweep over a whole feature matrix
in cache-friendly chunks and breaks cross-feature ties by pool index.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 256


def train_stump(
    values: np.ndarray, labels: np.ndarray, weights: np.ndarray
) -> tuple[float, int, float]:
    """Best (threshold, polarity, weighted_error) for one feature column."""
    values = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    err, thr, pol = _sweep(values, np.asarray(labels), np.asarray(weights, dtype=np.float64))
    return float(thr[0]), int(pol[0]), float(err[0])


def best_stump(
    matrix: np.ndarray,
    order: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
) -> tuple[int, float, int, float]:
    """Lowest-error stump over all columns of (N, F) ``matrix``.

    ``order`` is the per-column argsort of the matrix, computed once by the
    caller and reused across boosting rounds. Returns
    (feature_index, threshold, polarity, error); equal errors resolve to the
    smallest feature index.
    """
    n, nf = matrix.shape
    best = (np.inf, -1, 0.0, 1)
    w = np.asarray(weights, dtype=np.float64)
    for lo in range(0, nf, _CHUNK):
        hi = min(lo + _CHUNK, nf)
        sub = matrix[:, lo:hi]
        idx = order[:, lo:hi]
        sv = np.take_along_axis(sub, idx, axis=0).astype(np.float64)
        err, thr, pol = _sweep_sorted(sv, labels[idx], w[idx])
        j = int(np.argmin(err))
        if err[j] < best[0]:
            best = (float(err[j]), lo + j, float(thr[j]), int(pol[j]))
    if best[1] < 0:
        raise ValueError("empty feature matrix")
    return best[1], best[2], best[3], best[0]


def _sweep(values: np.ndarray, labels: np.ndarray, weights: np.ndarray):
    if values.shape[0] != labels.shape[0] or labels.shape[0] != weights.shape[0]:
        raise ValueError("values, labels, weights must align")
    if not (np.any(labels > 0) and np.any(labels < 0)):
        raise ValueError("both classes required to train a stump")
    order = np.argsort(values, axis=0, kind="stable")
    sv = np.take_along_axis(values, order, axis=0)
    return _sweep_sorted(sv, labels[order[:, 0]][:, None], weights[order[:, 0]][:, None])


def _sweep_sorted(sv: np.ndarray, sl: np.ndarray, sw: np.ndarray):
    """Split sweep over pre-sorted columns.

    sv/sl/sw are (N, C): values ascending per column with matching labels and
    weights. Candidate split i puts the first i samples below threshold;
    err_plus(i) is the error of predicting +1 at or above it.
    """
    n, c = sv.shape
    wpos = np.where(sl > 0, sw, 0.0)
    wneg = sw - wpos
    total = sw.sum(axis=0)
    neg_total = wneg.sum(axis=0)

    cum_pos = np.zeros((n + 1, c))
    cum_neg = np.zeros((n + 1, c))
    np.cumsum(wpos, axis=0, out=cum_pos[1:])
    np.cumsum(wneg, axis=0, out=cum_neg[1:])

    err_plus = cum_pos + (neg_total[None, :] - cum_neg)
    err_minus = total[None, :] - err_plus

    # splits inside a run of equal values are not realizable
    invalid = np.zeros((n + 1, c), dtype=bool)
    invalid[1:n] = sv[1:] <= sv[:-1]
    err_plus[invalid] = np.inf
    err_minus[invalid] = np.inf

    err = np.minimum(err_plus, err_minus)
    split = np.argmin(err, axis=0)  # first minimum: smallest threshold wins
    cols = np.arange(c)
    best_err = err[split, cols]
    polarity = np.where(err_plus[split, cols] <= err_minus[split, cols], 1, -1)

    thr = np.empty(c)
    for j in range(c):
        i = split[j]
        if i == 0:
            thr[j] = sv[0, j]  # everything at or above the minimum: all predicted high side
        elif i == n:
            thr[j] = np.nextafter(sv[n - 1, j], np.inf)
        else:
            mid = 0.5 * (sv[i - 1, j] + sv[i, j])
            thr[j] = mid if mid > sv[i - 1, j] else sv[i, j]
    return best_err, thr, polarity
