"""Feature pools and batch feature evaluation over training windows.

The Haar pool enumerates every feature that fits the base window (about 160k
for 24 px) and deterministically subsamples it by index stride; the BBF pool
draws seeded random rectangle pairs. Evaluation over a batch of windows is a
single sparse matmul: each feature collapses to a handful of integral-image
corner lookups, stored as one column of a sparse matrix.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from facescan.imaging import (
    BASE_WINDOW,
    BBFFeature,
    HaarFeature,
    HaarKind,
    corner_terms,
    haar_parts,
)

Feature = HaarFeature | BBFFeature


def enumerate_haar_features(base_window: int = BASE_WINDOW):
    """Every Haar feature fitting the window, in canonical order."""
    splits = {
        HaarKind.TWO_RECT_H: (2, 1),
        HaarKind.TWO_RECT_V: (1, 2),
        HaarKind.THREE_RECT_H: (3, 1),
        HaarKind.THREE_RECT_V: (1, 3),
        HaarKind.FOUR_RECT: (2, 2),
    }
    for kind in HaarKind:
        kx, ky = splits[kind]
        for w in range(kx, base_window + 1, kx):
            for h in range(ky, base_window + 1, ky):
                for y in range(0, base_window - h + 1):
                    for x in range(0, base_window - w + 1):
                        yield HaarFeature(kind, (x, y, w, h), base_window)


def haar_pool(max_count: int = 6000, base_window: int = BASE_WINDOW) -> list[HaarFeature]:
    """Exhaustive Haar pool subsampled to ``max_count`` by a fixed index stride."""
    full = list(enumerate_haar_features(base_window))
    if len(full) <= max_count:
        return full
    stride = -(-len(full) // max_count)  # ceil
    return full[::stride]


def bbf_pool(count: int = 6000, seed: int = 7, base_window: int = BASE_WINDOW) -> list[BBFFeature]:
    """Seeded random rect pairs for brightness-binary features."""
    rng = np.random.default_rng(seed)
    pool = []
    while len(pool) < count:
        rects = []
        for _ in range(2):
            w = int(rng.integers(3, base_window // 2 + 5))
            h = int(rng.integers(3, base_window // 2 + 5))
            x = int(rng.integers(0, base_window - w + 1))
            y = int(rng.integers(0, base_window - h + 1))
            rects.append((x, y, w, h))
        if rects[0] == rects[1]:
            continue
        pool.append(BBFFeature(rects[0], rects[1], base_window))
    return pool


def window_integrals(windows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stacked integral images for (N, W, W) uint8 windows.

    Returns (sums, inv_std): sums is (N, W+1, W+1) float64 and inv_std the
    per-window reciprocal of the floored stddev.
    """
    n, h, w = windows.shape
    g = windows.astype(np.int64)
    sums = np.zeros((n, h + 1, w + 1), dtype=np.int64)
    sq = np.zeros((n, h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(g, axis=1), axis=2, out=sums[:, 1:, 1:])
    np.cumsum(np.cumsum(g * g, axis=1), axis=2, out=sq[:, 1:, 1:])
    area = float(h * w)
    total = sums[:, h, w].astype(np.float64)
    mean = total / area
    var = np.maximum(0.0, sq[:, h, w] / area - mean * mean)
    inv_std = 1.0 / np.maximum(1.0, np.sqrt(var))
    return sums.astype(np.float64), inv_std


class FeaturePool:
    """A fixed feature list plus its sparse corner-lookup matrix.

    ``values(windows)`` yields the (N, F) matrix every trainer consumes:
    variance-normalized responses for Haar features, {0,1} bits for BBF.
    """

    def __init__(self, features: list[Feature], base_window: int = BASE_WINDOW):
        if not features:
            raise ValueError("empty feature pool")
        self.features = list(features)
        self.base_window = base_window
        self.family = "bbf" if isinstance(features[0], BBFFeature) else "haar"
        self._matrix = self._build_matrix()

    def __len__(self) -> int:
        return len(self.features)

    def _build_matrix(self) -> sparse.csc_matrix:
        side = self.base_window + 1
        rows, cols, vals = [], [], []
        for j, f in enumerate(self.features):
            if isinstance(f, HaarFeature):
                parts, area = haar_parts(f, 1.0)
                dys, dxs, coefs = corner_terms(parts)
                weights = coefs / float(area)
            else:
                # mean_a - mean_b: corner lookups of each rect at +-1/area
                acc: dict[tuple[int, int], float] = {}
                for (rx, ry, rw, rh), sgn in ((f.rect_a, 1), (f.rect_b, -1)):
                    inv_area = sgn / float(rw * rh)
                    for dy, dx, s in (
                        (ry + rh, rx + rw, 1),
                        (ry, rx + rw, -1),
                        (ry + rh, rx, -1),
                        (ry, rx, 1),
                    ):
                        acc[(dy, dx)] = acc.get((dy, dx), 0.0) + s * inv_area
                items = sorted((k, v) for k, v in acc.items() if v != 0.0)
                dys = np.array([k[0] for k, _ in items], dtype=np.int64)
                dxs = np.array([k[1] for k, _ in items], dtype=np.int64)
                weights = np.array([v for _, v in items])
            rows.extend(dys * side + dxs)
            cols.extend([j] * len(dys))
            vals.extend(weights)
        return sparse.csc_matrix(
            (vals, (rows, cols)), shape=(side * side, len(self.features)), dtype=np.float64
        )

    def values(self, windows: np.ndarray) -> np.ndarray:
        """(N, F) feature matrix for (N, W, W) uint8 windows."""
        sums, inv_std = window_integrals(windows)
        flat = sums.reshape(sums.shape[0], -1)
        raw = flat @ self._matrix
        if self.family == "haar":
            return (raw * inv_std[:, None]).astype(np.float32)
        return (raw > 0.0).astype(np.float32)
