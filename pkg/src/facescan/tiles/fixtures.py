"""In-process procedural tile layers for tests and offline runs.

Every maker derives pixels purely from global coordinates through integer
hashing, so adjacent tiles agree along their shared edges and any tile can
be regenerated bit-identically in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from facescan.classifier import IconParams, generate_face_icons, vary_seed

TileMaker = Callable[[int, int, int, int], np.ndarray]  # (z, x, y, tile_size)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 wraparound is intentional
    with np.errstate(over="ignore"):
        x = (x + _GOLDEN).astype(np.uint64)
        x ^= x >> np.uint64(30)
        x *= _MIX1
        x ^= x >> np.uint64(27)
        x *= _MIX2
        x ^= x >> np.uint64(31)
    return x


def hash01(seed: int, *coords: np.ndarray) -> np.ndarray:
    """Uniform [0,1) values keyed by integer coordinates."""
    acc = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    acc = _mix(np.asarray(acc, dtype=np.uint64))
    with np.errstate(over="ignore"):
        for c in coords:
            acc = _mix(acc ^ (np.asarray(c).astype(np.int64).view(np.uint64) * _GOLDEN))
    return (acc >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def _smooth(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def value_noise(seed: int, pxs: np.ndarray, pys: np.ndarray, period: int) -> np.ndarray:
    """Bilinear value noise over a lattice of the given period, in [0,1)."""
    ix = np.floor_divide(pxs, period)
    iy = np.floor_divide(pys, period)
    fx = _smooth((pxs - ix * period) / period)
    fy = _smooth((pys - iy * period) / period)
    v00 = hash01(seed, ix, iy)
    v10 = hash01(seed, ix + 1, iy)
    v01 = hash01(seed, ix, iy + 1)
    v11 = hash01(seed, ix + 1, iy + 1)
    top = v00 * (1 - fx) + v10 * fx
    bot = v01 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bot * fy


def _global_grid(x: int, y: int, tile_size: int):
    gx = x * tile_size + np.arange(tile_size, dtype=np.int64)
    gy = y * tile_size + np.arange(tile_size, dtype=np.int64)
    return np.meshgrid(gx, gy)


def terrain_maker(seed: int = 0) -> TileMaker:
    """Cratered terrain: layered value noise plus hashed bowl-and-rim craters."""

    cell = 40
    max_r = 19

    def make(z: int, x: int, y: int, tile_size: int) -> np.ndarray:
        pxs, pys = _global_grid(x, y, tile_size)
        zkey = seed * 1021 + z
        img = 110.0 + 70.0 * (value_noise(zkey, pxs, pys, 97) - 0.5)
        img += 28.0 * (value_noise(zkey + 1, pxs, pys, 31) - 0.5)
        img += 9.0 * (value_noise(zkey + 2, pxs, pys, 9) - 0.5)

        x0, y0 = x * tile_size, y * tile_size
        reach = max_r * 2 + 4  # bowl plus rim falloff
        c0x = (x0 - reach) // cell
        c1x = (x0 + tile_size + reach) // cell
        c0y = (y0 - reach) // cell
        c1y = (y0 + tile_size + reach) // cell
        for cy in range(c0y, c1y + 1):
            for cx in range(c0x, c1x + 1):
                if hash01(zkey + 3, np.int64(cx), np.int64(cy)) > 0.45:
                    continue
                ux = hash01(zkey + 4, np.int64(cx), np.int64(cy))
                uy = hash01(zkey + 5, np.int64(cx), np.int64(cy))
                ur = hash01(zkey + 6, np.int64(cx), np.int64(cy))
                ud = hash01(zkey + 7, np.int64(cx), np.int64(cy))
                ccx = float((cx + ux) * cell)
                ccy = float((cy + uy) * cell)
                radius = 4.0 + 15.0 * float(ur) ** 2
                depth = 18.0 + 36.0 * float(ud)
                # crater effect confined to a local patch of the tile
                lx0 = max(0, int(ccx - reach) - x0)
                lx1 = min(tile_size, int(ccx + reach) + 1 - x0)
                ly0 = max(0, int(ccy - reach) - y0)
                ly1 = min(tile_size, int(ccy + reach) + 1 - y0)
                if lx0 >= lx1 or ly0 >= ly1:
                    continue
                sub_x = pxs[ly0:ly1, lx0:lx1]
                sub_y = pys[ly0:ly1, lx0:lx1]
                r = np.sqrt((sub_x - ccx) ** 2 + (sub_y - ccy) ** 2)
                bowl = np.where(r < radius, depth * ((r / radius) ** 2 - 1.0), 0.0)
                rim = 0.4 * depth * np.exp(-(((r - radius) / (0.35 * radius)) ** 2))
                img[ly0:ly1, lx0:lx1] += bowl + rim
        return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)

    return make


def gradient_maker(z_ignored_period: int = 180) -> TileMaker:
    """Smooth sinusoidal ramp, continuous across every tile boundary."""

    def make(z: int, x: int, y: int, tile_size: int) -> np.ndarray:
        pxs, pys = _global_grid(x, y, tile_size)
        val = 128.0 + 70.0 * np.sin(pxs / z_ignored_period) * np.cos(pys / (z_ignored_period * 1.3))
        return np.clip(np.floor(val + 0.5), 0, 255).astype(np.uint8)

    return make


def coords_maker() -> TileMaker:
    """Pixels hash their own (z, x, y, local offset): stitch-check layer."""

    def make(z: int, x: int, y: int, tile_size: int) -> np.ndarray:
        lx = np.arange(tile_size, dtype=np.int64)
        ly = np.arange(tile_size, dtype=np.int64)
        mx, my = np.meshgrid(lx, ly)
        key = (
            np.int64(z) * np.int64(73856093)
            ^ np.int64(x) * np.int64(19349663)
            ^ np.int64(y) * np.int64(83492791)
        )
        vals = hash01(7, np.full_like(mx, key), mx, my)
        return (vals * 256.0).astype(np.uint8)

    return make


def noise_maker(seed: int = 0) -> TileMaker:
    def make(z: int, x: int, y: int, tile_size: int) -> np.ndarray:
        pxs, pys = _global_grid(x, y, tile_size)
        return (hash01(seed * 31 + z, pxs, pys) * 256.0).astype(np.uint8)

    return make


def blank_maker(value: int = 0) -> TileMaker:
    def make(z: int, x: int, y: int, tile_size: int) -> np.ndarray:
        return np.full((tile_size, tile_size), value, dtype=np.uint8)

    return make


@dataclass(frozen=True)
class Plant:
    """A face icon planted at fixed mosaic pixel coordinates."""

    z: int
    px: int
    py: int
    size: int
    seed: int


def planted_maker(base: TileMaker, plants: list[Plant], params: IconParams | None = None) -> TileMaker:
    """Overlay face icons on a base layer wherever their boxes intersect tiles."""

    p0 = params or IconParams()

    def make(z: int, x: int, y: int, tile_size: int) -> np.ndarray:
        img = base(z, x, y, tile_size).copy()
        tx0, ty0 = x * tile_size, y * tile_size
        for p in plants:
            if p.z != z:
                continue
            ix0 = max(p.px, tx0)
            iy0 = max(p.py, ty0)
            ix1 = min(p.px + p.size, tx0 + tile_size)
            iy1 = min(p.py + p.size, ty0 + tile_size)
            if ix0 >= ix1 or iy0 >= iy1:
                continue
            icon = generate_face_icons(1, vary_seed(p0, p.seed), window=p.size)[0]
            img[iy0 - ty0 : iy1 - ty0, ix0 - tx0 : ix1 - tx0] = icon[
                iy0 - p.py : iy1 - p.py, ix0 - p.px : ix1 - p.px
            ]
        return img

    return make


class FixtureError(Exception):
    """Scripted failure raised by the fixture server."""

    def __init__(self, message: str, transient: bool = True, not_found: bool = False):
        super().__init__(message)
        self.transient = transient
        self.not_found = not_found


class FixtureTileServer:
    """Deterministic tile backend with call counting and scripted failures.

    Layers resolve by exact registered name first, then by "prefix:arg"
    against the built-in factories (e.g. "terrain:7" is terrain with seed 7).
    """

    def __init__(self):
        self._makers: dict[str, TileMaker] = {
            "terrain": terrain_maker(0),
            "gradient": gradient_maker(),
            "coords": coords_maker(),
            "noise": noise_maker(0),
            "blank": blank_maker(0),
        }
        self._factories: dict[str, Callable[[str], TileMaker]] = {
            "terrain": lambda arg: terrain_maker(int(arg)),
            "noise": lambda arg: noise_maker(int(arg)),
            "blank": lambda arg: blank_maker(int(arg)),
        }
        self.calls: dict[tuple[str, int, int, int], int] = {}
        self._failures: dict[tuple[str, int, int, int], list[FixtureError]] = {}

    def register(self, name: str, maker: TileMaker) -> None:
        self._makers[name] = maker

    def script_failures(self, layer: str, z: int, x: int, y: int, errors: list[FixtureError]) -> None:
        self._failures[(layer, z, x, y)] = list(errors)

    def call_count(self, layer: str, z: int, x: int, y: int) -> int:
        return self.calls.get((layer, z, x, y), 0)

    @property
    def total_calls(self) -> int:
        return sum(self.calls.values())

    def resolve(self, layer: str) -> TileMaker:
        if layer in self._makers:
            return self._makers[layer]
        if ":" in layer:
            prefix, arg = layer.split(":", 1)
            if prefix in self._factories:
                maker = self._factories[prefix](arg)
                self._makers[layer] = maker
                return maker
        raise KeyError(f"no fixture layer {layer!r}")

    def render(self, layer: str, z: int, x: int, y: int, tile_size: int = 256) -> np.ndarray:
        maker = self.resolve(layer)
        key = (layer, z, x, y)
        self.calls[key] = self.calls.get(key, 0) + 1
        pending = self._failures.get(key)
        if pending:
            raise pending.pop(0)
        return maker(z, x, y, tile_size)


DEFAULT_FIXTURES = FixtureTileServer()
