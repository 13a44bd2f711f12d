"""Synthetic face icons and background negatives for cascade training.

Icons are rendered 4x supersampled and box-downsampled to the base window:
a filled face disk a touch brighter than the background, dark outline, two
dark eyes above center, and a dark mouth arc below, with random rotation,
geometry jitter, and additive noise. Everything is driven by one seeded
generator, so a given (params, count) pair reproduces bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from facescan.imaging import BASE_WINDOW

_SS = 4  # supersampling factor


@dataclass(frozen=True)
class IconParams:
    """Ranges (lo, hi) for the per-icon random draws. All in window-relative units."""

    radius: tuple[float, float] = (0.345, 0.44)  # face radius / window
    aspect: tuple[float, float] = (0.78, 1.0)  # rx / ry, 1 = circle
    eye_span: tuple[float, float] = (0.34, 0.52)  # eye x offset / rx
    eye_height: tuple[float, float] = (0.16, 0.36)  # eye y above center / ry
    eye_radius: tuple[float, float] = (0.10, 0.17)  # eye radius / face radius
    mouth_drop: tuple[float, float] = (0.30, 0.52)  # mouth y below center / ry
    mouth_width: tuple[float, float] = (0.38, 0.58)  # half-width / rx
    mouth_curve: tuple[float, float] = (0.10, 0.42)  # end raise / ry
    rotation_deg: tuple[float, float] = (-15.0, 15.0)
    background: tuple[float, float] = (95.0, 170.0)
    face_lift: tuple[float, float] = (6.0, 26.0)  # face fill above background
    ink_drop: tuple[float, float] = (45.0, 95.0)  # ink below background
    outline: tuple[float, float] = (0.08, 0.16)  # ring thickness / face radius
    noise_stddev: tuple[float, float] = (0.5, 2.5)
    seed: int = 0

    def __post_init__(self):
        for name in (
            "radius", "aspect", "eye_span", "eye_height", "eye_radius",
            "mouth_drop", "mouth_width", "mouth_curve", "rotation_deg",
            "background", "face_lift", "ink_drop", "outline", "noise_stddev",
        ):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"degenerate range for {name}: ({lo}, {hi})")
        if not (0.0 < self.radius[0] and self.radius[1] <= 0.5):
            raise ValueError("radius range must sit inside (0, 0.5]")


def stylized_params(seed: int = 0) -> IconParams:
    """Higher-contrast preset with larger eyes, for a second ensemble member."""
    return IconParams(
        eye_radius=(0.15, 0.23),
        eye_height=(0.14, 0.30),
        ink_drop=(70.0, 120.0),
        face_lift=(12.0, 34.0),
        outline=(0.11, 0.20),
        seed=seed,
    )


def _draw(rng: np.random.Generator, lo_hi: tuple[float, float]) -> float:
    return float(rng.uniform(lo_hi[0], lo_hi[1]))


def _render_icon(rng: np.random.Generator, p: IconParams, window: int) -> np.ndarray:
    side = window * _SS
    # supersample grid in window units, pixel centers
    c = (np.arange(side) + 0.5) / _SS
    gx, gy = np.meshgrid(c, c)

    r = _draw(rng, p.radius) * window
    ry = r
    rx = r * _draw(rng, p.aspect)
    cx = window / 2 + rng.uniform(-0.03, 0.03) * window
    cy = window / 2 + rng.uniform(-0.03, 0.03) * window
    theta = np.deg2rad(_draw(rng, p.rotation_deg))

    # rotate into the face frame
    dx, dy = gx - cx, gy - cy
    fx = np.cos(theta) * dx + np.sin(theta) * dy
    fy = -np.sin(theta) * dx + np.cos(theta) * dy

    norm = np.sqrt((fx / rx) ** 2 + (fy / ry) ** 2)
    ring = _draw(rng, p.outline)
    face = norm <= 1.0
    outline = (norm <= 1.0) & (norm >= 1.0 - ring)

    ex = _draw(rng, p.eye_span) * rx
    ey = -_draw(rng, p.eye_height) * ry
    er = _draw(rng, p.eye_radius) * r
    eyes = ((fx - ex) ** 2 + (fy - ey) ** 2 <= er * er) | (
        (fx + ex) ** 2 + (fy - ey) ** 2 <= er * er
    )

    my = _draw(rng, p.mouth_drop) * ry
    mw = _draw(rng, p.mouth_width) * rx
    curve = _draw(rng, p.mouth_curve) * ry
    thick = max(0.35, 0.06 * r)
    arc_y = my - curve * (fx / mw) ** 2
    mouth = (np.abs(fx) <= mw) & (np.abs(fy - arc_y) <= thick)

    bg = _draw(rng, p.background)
    fill = bg + _draw(rng, p.face_lift)
    ink = bg - _draw(rng, p.ink_drop)

    img = np.full((side, side), bg)
    img[face] = fill
    img[outline | eyes | mouth] = ink

    small = img.reshape(window, _SS, window, _SS).mean(axis=(1, 3))
    small = small + rng.normal(0.0, _draw(rng, p.noise_stddev), small.shape)
    return np.clip(np.floor(small + 0.5), 0, 255).astype(np.uint8)


def generate_face_icons(
    count: int, params: IconParams | None = None, window: int = BASE_WINDOW
) -> np.ndarray:
    """(count, window, window) uint8 positive windows, deterministic per seed."""
    if count < 0:
        raise ValueError("count must be >= 0")
    p = params or IconParams()
    rng = np.random.default_rng(p.seed)
    out = np.empty((count, window, window), dtype=np.uint8)
    for i in range(count):
        out[i] = _render_icon(rng, p, window)
    return out


def sample_negatives(
    backgrounds: list[np.ndarray],
    count: int,
    seed: int = 0,
    window: int = BASE_WINDOW,
) -> np.ndarray:
    """Random multi-scale crops of face-free imagery, box-resized to the window.

    Crop side is drawn log-uniformly between the window and 3x the window
    (capped by the source), so negatives cover the scale range scanning sees.
    """
    if not backgrounds:
        raise ValueError("no background images")
    for im in backgrounds:
        if im.ndim != 2 or min(im.shape) < window:
            raise ValueError(f"background smaller than window: {im.shape}")
    rng = np.random.default_rng(seed)
    out = np.empty((count, window, window), dtype=np.uint8)
    for i in range(count):
        im = backgrounds[int(rng.integers(0, len(backgrounds)))]
        h, w = im.shape
        max_side = min(h, w, window * 3)
        side = int(np.floor(np.exp(rng.uniform(np.log(window), np.log(max_side + 1)))))
        side = min(side, max_side)
        y = int(rng.integers(0, h - side + 1))
        x = int(rng.integers(0, w - side + 1))
        crop = im[y : y + side, x : x + side]
        out[i] = _box_resize(crop, window)
    return out


def _box_resize(img: np.ndarray, target: int) -> np.ndarray:
    """Area-average resize of a square uint8 image to target x target."""
    if img.shape[0] == target:
        return img.copy()
    small = Image.fromarray(img).resize((target, target), Image.Resampling.BOX)
    return np.asarray(small, dtype=np.uint8)


def vary_seed(params: IconParams, seed: int) -> IconParams:
    return replace(params, seed=seed)
