"""Attentional cascade: staged boosted classifiers with early rejection.

A window passes a stage when its weighted stump score reaches the stage
threshold; any failure rejects immediately. Training adds stages until the
measured false-positive rate on bootstrapped negatives reaches the overall
target, mining each new stage's negatives from whatever the cascade built so
far still accepts on face-free imagery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from facescan.classifier.boosting import WeakClassifier
from facescan.classifier.features import window_integrals
from facescan.imaging import (
    HaarFeature,
    IntegralImage,
    bbf_rects,
    corner_terms,
    eval_bbf,
    eval_haar,
    haar_parts,
    scaled_window,
    window_stats,
    window_stats_grid,
)


@dataclass(frozen=True)
class CascadeStage:
    weak: tuple[WeakClassifier, ...]
    threshold: float

    def __post_init__(self):
        if not self.weak:
            raise ValueError("stage needs at least one weak classifier")


@dataclass(frozen=True)
class Cascade:
    base_window: int
    family: str  # "haar" or "bbf"
    stages: tuple[CascadeStage, ...]
    meta: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.family not in ("haar", "bbf"):
            raise ValueError(f"unknown feature family {self.family!r}")
        if self.base_window < 4:
            raise ValueError("base window too small")

    @property
    def meta_dict(self) -> dict[str, str]:
        return dict(self.meta)

    @property
    def total_weak(self) -> int:
        return sum(len(s.weak) for s in self.stages)


def classify_window(
    cascade: Cascade, ii: IntegralImage, origin: tuple[int, int], scale: float = 1.0
) -> tuple[bool, float, int]:
    """Scalar reference path: (accepted, score, stages_evaluated).

    Score is the margin over the last evaluated stage's threshold, so
    rejected windows report how badly they missed.
    """
    win = scaled_window(cascade.base_window, scale)
    ox, oy = origin
    _, std = window_stats(ii, (ox, oy, win, win))
    inv_std = 1.0 / std
    margin = 0.0
    for n, stage in enumerate(cascade.stages):
        score = 0.0
        for wc in stage.weak:
            if isinstance(wc.feature, HaarFeature):
                value = eval_haar(ii, wc.feature, origin, scale, inv_std)
            else:
                value = float(eval_bbf(ii, wc.feature, origin, scale))
            h = wc.polarity if value >= wc.threshold else -wc.polarity
            score += wc.alpha * h
        margin = score - stage.threshold
        if margin < 0.0:
            return False, margin, n + 1
    return True, margin, len(cascade.stages)


@dataclass(frozen=True)
class _CompiledWeak:
    is_bbf: bool
    dys: np.ndarray
    dxs: np.ndarray
    coefs: np.ndarray  # float64, area normalization folded in
    threshold: float
    polarity: int
    alpha: float


def _compile(cascade: Cascade, scale: float) -> list[tuple[list[_CompiledWeak], float]]:
    out = []
    for stage in cascade.stages:
        weak = []
        for wc in stage.weak:
            if isinstance(wc.feature, HaarFeature):
                parts, area = haar_parts(wc.feature, scale)
                dys, dxs, coefs = corner_terms(parts)
                weak.append(
                    _CompiledWeak(False, dys, dxs, coefs / float(area), wc.threshold, wc.polarity, wc.alpha)
                )
            else:
                ra, rb = bbf_rects(wc.feature, scale)
                acc: dict[tuple[int, int], float] = {}
                for (x, y, w, h), sgn in ((ra, 1), (rb, -1)):
                    inv_area = sgn / float(w * h)
                    for dy, dx, s in ((y + h, x + w, 1), (y, x + w, -1), (y + h, x, -1), (y, x, 1)):
                        acc[(dy, dx)] = acc.get((dy, dx), 0.0) + s * inv_area
                items = sorted((k, v) for k, v in acc.items() if v != 0.0)
                weak.append(
                    _CompiledWeak(
                        True,
                        np.array([k[0] for k, _ in items], dtype=np.int64),
                        np.array([k[1] for k, _ in items], dtype=np.int64),
                        np.array([v for _, v in items]),
                        wc.threshold,
                        wc.polarity,
                        wc.alpha,
                    )
                )
        out.append((weak, stage.threshold))
    return out


def eval_at_origins(
    cascade: Cascade,
    ii: IntegralImage,
    xs: np.ndarray,
    ys: np.ndarray,
    scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the cascade over many window origins of one integral image.

    Returns (accepted, scores, stages_passed). Scores carry the margin at the
    last stage each window reached. Origins must keep the scaled window inside
    the image; the caller handles variance skipping before calling.
    """
    n = len(xs)
    accepted = np.zeros(n, dtype=bool)
    scores = np.zeros(n)
    stages_passed = np.zeros(n, dtype=np.int16)
    if n == 0:
        return accepted, scores, stages_passed

    win = scaled_window(cascade.base_window, scale)
    _, stds = window_stats_grid(ii, xs, ys, win)
    inv_std = 1.0 / stds

    sums = ii.sums
    alive = np.arange(n)
    compiled = _compile(cascade, scale)
    for weak, thr in compiled:
        score = np.zeros(len(alive))
        ax, ay = xs[alive], ys[alive]
        for cw in weak:
            vals = np.zeros(len(alive))
            for dy, dx, c in zip(cw.dys, cw.dxs, cw.coefs):
                vals += c * sums[ay + dy, ax + dx]
            if cw.is_bbf:
                vals = (vals > 0.0).astype(np.float64)
            else:
                vals *= inv_std[alive]
            h = np.where(vals >= cw.threshold, cw.polarity, -cw.polarity)
            score += cw.alpha * h
        margin = score - thr
        scores[alive] = margin
        ok = margin >= 0.0
        stages_passed[alive[ok]] += 1
        alive = alive[ok]
        if len(alive) == 0:
            break
    accepted[alive] = True
    return accepted, scores, stages_passed


def eval_patches(cascade: Cascade, windows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cascade over stacked base-window patches (N, W, W) at scale 1."""
    n, h, w = windows.shape
    if h != cascade.base_window or w != cascade.base_window:
        raise ValueError(f"patches must be {cascade.base_window} px square")
    sums, inv_std = window_integrals(windows)

    accepted = np.zeros(n, dtype=bool)
    scores = np.zeros(n)
    stages_passed = np.zeros(n, dtype=np.int16)
    alive = np.arange(n)
    for weak, thr in _compile(cascade, 1.0):
        sub = sums[alive]
        score = np.zeros(len(alive))
        for cw in weak:
            vals = sub[:, cw.dys, cw.dxs] @ cw.coefs
            if cw.is_bbf:
                vals = (vals > 0.0).astype(np.float64)
            else:
                vals *= inv_std[alive]
            score += cw.alpha * np.where(vals >= cw.threshold, cw.polarity, -cw.polarity)
        margin = score - thr
        scores[alive] = margin
        ok = margin >= 0.0
        stages_passed[alive[ok]] += 1
        alive = alive[ok]
        if len(alive) == 0:
            break
    accepted[alive] = True
    return accepted, scores, stages_passed
