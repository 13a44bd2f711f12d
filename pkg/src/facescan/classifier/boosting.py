"""Discrete AdaBoost over decision stumps.

Weights start uniform (or caller-supplied) and are renormalized to sum 1
after every round. A round whose best stump cannot beat chance (error >=
0.5) ends boosting without emitting it; a perfect stump is emitted with its
error floored at 1e-10 and ends boosting, since reweighting would degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from facescan.classifier.features import Feature, FeaturePool
from facescan.classifier.stumps import best_stump

_ERR_FLOOR = 1e-10


@dataclass(frozen=True)
class WeakClassifier:
    feature: Feature
    threshold: float
    polarity: int  # +1 or -1, prediction at or above threshold
    alpha: float

    def __post_init__(self):
        if self.polarity not in (-1, 1):
            raise ValueError("polarity must be +-1")
        if not np.isfinite(self.alpha) or self.alpha <= 0.0:
            raise ValueError("alpha must be positive and finite")


@dataclass(frozen=True)
class RoundPick:
    feature_index: int
    threshold: float
    polarity: int
    alpha: float
    error: float


def stump_predict(values: np.ndarray, threshold: float, polarity: int) -> np.ndarray:
    """Vector of +-1 stump outputs for raw feature values."""
    return np.where(values >= threshold, polarity, -polarity).astype(np.int8)


def boost_rounds(
    matrix: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray | None = None,
    order: np.ndarray | None = None,
) -> Iterator[tuple[RoundPick, np.ndarray, np.ndarray]]:
    """Yield (pick, margins, weights) per round until the signal runs out.

    ``margins`` is the running ensemble score sum(alpha_t * h_t(x)) over the
    training rows; ``weights`` is the normalized distribution the round's
    stump was selected under. Both are read-only views for calibration and
    invariant checks. Stopping early is the caller's job: stop iterating.
    """
    labels = np.asarray(labels, dtype=np.float64)
    n = matrix.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=np.float64).copy()
        if w.min() < 0.0 or w.sum() <= 0.0:
            raise ValueError("weights must be non-negative with positive sum")
        w /= w.sum()
    if order is None:
        order = np.argsort(matrix, axis=0, kind="stable").astype(np.int32)

    margins = np.zeros(n)
    while True:
        fidx, thr, pol, err = best_stump(matrix, order, labels, w)
        if err >= 0.5:
            return
        clamped = max(err, _ERR_FLOOR)
        alpha = float(0.5 * np.log((1.0 - clamped) / clamped))
        preds = stump_predict(matrix[:, fidx].astype(np.float64), thr, pol)
        margins = margins + alpha * preds
        yield RoundPick(fidx, thr, pol, alpha, err), margins, w
        if err <= _ERR_FLOOR:
            return
        w = w * np.exp(-alpha * labels * preds)
        w /= w.sum()


def adaboost(
    windows: np.ndarray,
    labels: np.ndarray,
    pool: FeaturePool,
    rounds: int,
    weights: np.ndarray | None = None,
) -> list[WeakClassifier]:
    """Train ``rounds`` stumps over the pool; may stop early on degenerate error."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    matrix = pool.values(windows)
    out = []
    for pick, _, _ in boost_rounds(matrix, labels, weights):
        out.append(
            WeakClassifier(pool.features[pick.feature_index], pick.threshold, pick.polarity, pick.alpha)
        )
        if len(out) >= rounds:
            break
    return out
