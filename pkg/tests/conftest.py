"""Shared fixtures: smooth terrain imagery and a small trained cascade."""

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from facescan.classifier import (
    FeaturePool,
    IconParams,
    NegativeSource,
    TrainConfig,
    generate_face_icons,
    haar_pool,
    train_cascade,
)


def terrain_images(n, side, seed):
    """Face-free smooth terrain: blurred broad relief plus fine ripple."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        base = gaussian_filter(rng.normal(size=(side, side)), 6.0)
        ripple = gaussian_filter(rng.normal(size=(side, side)), 1.5)
        img = base * 90 + ripple * 25
        img = (img - img.min()) / (np.ptp(img) + 1e-9) * 200 + 25
        out.append(img.astype(np.uint8))
    return out


@pytest.fixture(scope="session")
def mini_cascade():
    """Five-stage cascade trained on a desk-size corpus; shared read-only."""
    positives = generate_face_icons(260, IconParams(seed=10))
    source = NegativeSource(terrain_images(6, 260, seed=44), seed=9)
    pool = FeaturePool(haar_pool(1200))
    config = TrainConfig(
        pool_size=1200, max_stages=5, max_weak_per_stage=18, stage_negatives=700, seed=2
    )
    cascade, report = train_cascade(
        positives, source, config=config, pool=pool, meta={"name": "mini"}
    )
    return cascade, report
