"""Pixel-level kernels: grayscale, integral images, Haar and brightness-binary features.

Images are numpy ``uint8`` arrays of shape (height, width). Integral images
carry 64-bit cumulative sums so rectangle sums stay exact for mosaics far
beyond anything a single scan window touches (plain sums need 40 bits and
squared sums 48 bits at 2**16 x 2**16, both comfortably inside int64).

Features are defined on a square base window (24 px) and scaled at evaluation
time; rectangle edges snap to integer pixels in a way that keeps the
white/black areas exactly balanced, so any feature on a constant patch
evaluates to exactly zero at every scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

BASE_WINDOW = 24

Rect = tuple[int, int, int, int]  # x, y, w, h

# ITU-R BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Convert an 8-bit RGB image (H, W, 3) to luma, round-half-up."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB input, got shape {rgb.shape}")
    if rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ValueError("zero-sized image")
    luma = rgb.astype(np.float64) @ _LUMA
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class IntegralImage:
    """Cumulative sums over an image; ``sums[y, x]`` covers pixels [0,y) x [0,x)."""

    width: int
    height: int
    sums: np.ndarray          # (H+1, W+1) int64
    squared_sums: np.ndarray  # (H+1, W+1) int64


def integral_image(gray: np.ndarray) -> IntegralImage:
    """Build the integral image (plain and squared sums) of a grayscale image."""
    g = np.asarray(gray)
    if g.ndim != 2 or g.shape[0] < 1 or g.shape[1] < 1:
        raise ValueError(f"expected non-empty (H, W) image, got shape {g.shape}")
    h, w = g.shape
    g64 = g.astype(np.int64)
    sums = np.zeros((h + 1, w + 1), dtype=np.int64)
    sq = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(g64, axis=0), axis=1, out=sums[1:, 1:])
    np.cumsum(np.cumsum(g64 * g64, axis=0), axis=1, out=sq[1:, 1:])
    return IntegralImage(w, h, sums, sq)


def rect_sum(ii: IntegralImage, rect: Rect) -> int:
    """Sum of pixels in rect (x, y, w, h) via the four-lookup identity."""
    x, y, w, h = rect
    if w < 0 or h < 0 or x < 0 or y < 0 or x + w > ii.width or y + h > ii.height:
        raise ValueError(f"rect {rect} outside {ii.width}x{ii.height} image")
    s = ii.sums
    return int(s[y + h, x + w] - s[y, x + w] - s[y + h, x] + s[y, x])


def _rect_sum_unchecked(table: np.ndarray, x, y, w, h):
    # vector-friendly core; x/y may be arrays
    return table[y + h, x + w] - table[y, x + w] - table[y + h, x] + table[y, x]


def window_stats(ii: IntegralImage, rect: Rect) -> tuple[float, float]:
    """Mean and stddev of a window; stddev floored at 1.0.

    The floor keeps the variance normalization used by the feature
    evaluators from blowing up on flat windows.
    """
    x, y, w, h = rect
    area = w * h
    if area < 1:
        raise ValueError(f"rect {rect} has empty area")
    total = rect_sum(ii, rect)
    mean = total / area
    sq = int(_rect_sum_unchecked(ii.squared_sums, x, y, w, h))
    var = max(0.0, sq / area - mean * mean)
    return mean, max(1.0, math.sqrt(var))


def window_stats_grid(
    ii: IntegralImage, xs: np.ndarray, ys: np.ndarray, win: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized window_stats for many same-sized windows at origins (xs, ys)."""
    area = float(win * win)
    total = _rect_sum_unchecked(ii.sums, xs, ys, win, win).astype(np.float64)
    sq = _rect_sum_unchecked(ii.squared_sums, xs, ys, win, win).astype(np.float64)
    mean = total / area
    var = np.maximum(0.0, sq / area - mean * mean)
    return mean, np.maximum(1.0, np.sqrt(var))


class HaarKind(str, Enum):
    TWO_RECT_H = "two_rect_h"
    TWO_RECT_V = "two_rect_v"
    THREE_RECT_H = "three_rect_h"
    THREE_RECT_V = "three_rect_v"
    FOUR_RECT = "four_rect"


# (horizontal split factor, vertical split factor) per kind
_SPLITS = {
    HaarKind.TWO_RECT_H: (2, 1),
    HaarKind.TWO_RECT_V: (1, 2),
    HaarKind.THREE_RECT_H: (3, 1),
    HaarKind.THREE_RECT_V: (1, 3),
    HaarKind.FOUR_RECT: (2, 2),
}


@dataclass(frozen=True)
class HaarFeature:
    """One Haar-like feature: a kind plus its outer rect in base-window coords."""

    kind: HaarKind
    rect: Rect
    base_window: int = BASE_WINDOW

    def __post_init__(self):
        x, y, w, h = self.rect
        kx, ky = _SPLITS[self.kind]
        if w < kx or h < ky or w % kx or h % ky:
            raise ValueError(f"{self.kind.value} rect {self.rect} not evenly splittable")
        if x < 0 or y < 0 or x + w > self.base_window or y + h > self.base_window:
            raise ValueError(f"rect {self.rect} outside base window {self.base_window}")


@dataclass(frozen=True)
class BBFFeature:
    """Brightness-binary feature: compares mean brightness of two rects."""

    rect_a: Rect
    rect_b: Rect
    base_window: int = BASE_WINDOW

    def __post_init__(self):
        for r in (self.rect_a, self.rect_b):
            x, y, w, h = r
            if w < 1 or h < 1:
                raise ValueError(f"rect {r} has empty area")
            if x < 0 or y < 0 or x + w > self.base_window or y + h > self.base_window:
                raise ValueError(f"rect {r} outside base window {self.base_window}")


def haar_parts(f: HaarFeature, scale: float = 1.0) -> tuple[list[tuple[Rect, int]], int]:
    """Scaled sub-rectangles with weights, plus the scaled outer area.

    Edges snap to integers with the split dimension forced to a multiple of
    its split factor so the weighted areas cancel exactly. At scale 1 this is
    the identity. Raises if the scaled feature no longer fits the window.
    """
    x, y, w, h = f.rect
    kx, ky = _SPLITS[f.kind]
    win = scaled_window(f.base_window, scale)
    if win < kx or win < ky:
        raise ValueError(f"feature {f.rect} at scale {scale} exceeds window {win}")
    ws = kx * max(1, min(round(w * scale / kx), win // kx))
    hs = ky * max(1, min(round(h * scale / ky), win // ky))
    xs = min(round(x * scale), win - ws)
    ys = min(round(y * scale), win - hs)

    parts: list[tuple[Rect, int]]
    if f.kind is HaarKind.TWO_RECT_H:
        hw = ws // 2
        parts = [((xs, ys, hw, hs), 1), ((xs + hw, ys, hw, hs), -1)]
    elif f.kind is HaarKind.TWO_RECT_V:
        hh = hs // 2
        parts = [((xs, ys, ws, hh), 1), ((xs, ys + hh, ws, hh), -1)]
    elif f.kind is HaarKind.THREE_RECT_H:
        tw = ws // 3
        parts = [
            ((xs, ys, tw, hs), 1),
            ((xs + tw, ys, tw, hs), -2),
            ((xs + 2 * tw, ys, tw, hs), 1),
        ]
    elif f.kind is HaarKind.THREE_RECT_V:
        th = hs // 3
        parts = [
            ((xs, ys, ws, th), 1),
            ((xs, ys + th, ws, th), -2),
            ((xs, ys + 2 * th, ws, th), 1),
        ]
    else:  # FOUR_RECT
        hw, hh = ws // 2, hs // 2
        parts = [
            ((xs, ys, hw, hh), 1),
            ((xs + hw, ys, hw, hh), -1),
            ((xs, ys + hh, hw, hh), -1),
            ((xs + hw, ys + hh, hw, hh), 1),
        ]
    return parts, ws * hs


def scaled_window(base_window: int, scale: float) -> int:
    """Window side in pixels after scaling the base window."""
    return max(1, round(base_window * scale))


def bbf_rects(f: BBFFeature, scale: float = 1.0) -> tuple[Rect, Rect]:
    """Both BBF rects scaled and snapped; raises if either leaves the window."""
    win = scaled_window(f.base_window, scale)
    out = []
    for x, y, w, h in (f.rect_a, f.rect_b):
        ws = min(max(1, round(w * scale)), win)
        hs = min(max(1, round(h * scale)), win)
        out.append((min(round(x * scale), win - ws), min(round(y * scale), win - hs), ws, hs))
    return out[0], out[1]


def eval_haar(
    ii: IntegralImage,
    f: HaarFeature,
    window_origin: tuple[int, int],
    scale: float = 1.0,
    inv_stddev: float = 1.0,
) -> float:
    """Variance-normalized Haar response: (white - black) * inv_stddev / area."""
    ox, oy = window_origin
    parts, area = haar_parts(f, scale)
    acc = 0
    for (x, y, w, h), weight in parts:
        acc += weight * rect_sum(ii, (ox + x, oy + y, w, h))
    return acc * inv_stddev / area


def eval_bbf(
    ii: IntegralImage,
    f: BBFFeature,
    window_origin: tuple[int, int],
    scale: float = 1.0,
) -> int:
    """1 if mean(rect_a) > mean(rect_b) else 0; ties break to 0."""
    ox, oy = window_origin
    (ax, ay, aw, ah), (bx, by, bw, bh) = bbf_rects(f, scale)
    mean_a = rect_sum(ii, (ox + ax, oy + ay, aw, ah)) / (aw * ah)
    mean_b = rect_sum(ii, (ox + bx, oy + by, bw, bh)) / (bw * bh)
    return 1 if mean_a > mean_b else 0


def corner_terms(parts: list[tuple[Rect, int]]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse weighted rects into integral-image corner lookups.

    Returns (dys, dxs, coefs) relative to the window origin such that the
    weighted rect-sum equals sum(coef * sums[oy + dy, ox + dx]). Duplicate
    corners merge, so two_rect features cost 6 lookups instead of 8.
    """
    acc: dict[tuple[int, int], int] = {}
    for (x, y, w, h), weight in parts:
        for dy, dx, sgn in ((y + h, x + w, 1), (y, x + w, -1), (y + h, x, -1), (y, x, 1)):
            key = (dy, dx)
            acc[key] = acc.get(key, 0) + sgn * weight
    pts = [(dy, dx, c) for (dy, dx), c in sorted(acc.items()) if c != 0]
    dys = np.array([p[0] for p in pts], dtype=np.int64)
    dxs = np.array([p[1] for p in pts], dtype=np.int64)
    coefs = np.array([p[2] for p in pts], dtype=np.int64)
    return dys, dxs, coefs
