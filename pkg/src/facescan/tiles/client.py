"""Tile acquisition: pluggable sources, retrying fetches, disk cache, stitching.

Three source kinds share one fetch path:

* ``local_dir``     -- tiles on disk in XYZ layout (or a path template)
* ``http_template`` -- an XYZ URL template fetched over HTTP(S)
* ``fixture``       -- the in-process procedural server from ``fixtures``

Fetched tiles are decoded to 8-bit grayscale and cached under
``{cache_root}/{layer}/{z}/{x}/{y}.png``; a cache hit never touches the
source. ``assemble_region`` stitches a tile rectangle plus a pixel halo into
one image so windows spanning tile seams stay detectable.
"""

from __future__ import annotations

import io
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from facescan.geo import Body, PixelPoint, TileCoord, mosaic_size_px
from facescan.tiles.fixtures import DEFAULT_FIXTURES, FixtureError, FixtureTileServer

__all__ = [
    "SourceKind",
    "TileSourceSpec",
    "TileData",
    "RegionRequest",
    "AssembledRegion",
    "TileError",
    "TileNotFound",
    "DecodeError",
    "FetchExhausted",
    "TileFetcher",
    "fetch_tile",
    "assemble_region",
    "low_information",
]

_BACKOFFS = (0.5, 1.0, 2.0)  # seconds between retry attempts
_VALID_TILE_SIZES = (256, 512)


class SourceKind(str, Enum):
    LOCAL_DIR = "local_dir"
    HTTP_TEMPLATE = "http_template"
    FIXTURE = "fixture"


class TileError(Exception):
    """Base for tile acquisition failures."""


class TileNotFound(TileError):
    """The source definitively has no tile at this coordinate."""


class DecodeError(TileError):
    """Bytes arrived but could not be decoded as an image."""


class FetchExhausted(TileError):
    """Transient failures persisted through every retry."""


@dataclass(frozen=True)
class TileSourceSpec:
    """Where tiles for one layer come from and how the pyramid is shaped."""

    kind: SourceKind
    uri: str
    layer: str
    body: Body
    projection: str = "equirectangular"
    tile_size: int = 256
    max_zoom: int | None = None

    def __post_init__(self):
        kind = SourceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.tile_size not in _VALID_TILE_SIZES:
            raise ValueError(f"tile_size must be one of {_VALID_TILE_SIZES}, got {self.tile_size}")
        if not self.layer:
            raise ValueError("layer id must be non-empty")
        if not self.uri:
            raise ValueError("uri must be non-empty")
        if kind is SourceKind.HTTP_TEMPLATE:
            missing = [p for p in ("{z}", "{x}", "{y}") if p not in self.uri]
            if missing:
                raise ValueError(f"template missing placeholders {missing}: {self.uri!r}")
        if self.max_zoom is not None and self.max_zoom < 0:
            raise ValueError("max_zoom must be >= 0")


@dataclass(frozen=True)
class TileData:
    """One decoded grayscale tile."""

    coord: TileCoord
    pixels: np.ndarray
    fetched_at: float
    source_etag: str | None = None

    def __post_init__(self):
        if self.pixels.ndim != 2 or self.pixels.shape[0] != self.pixels.shape[1]:
            raise ValueError(f"tile pixels must be square 2-D, got {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"tile pixels must be uint8, got {self.pixels.dtype}")


@dataclass(frozen=True)
class RegionRequest:
    """A tile rectangle [x0..x1]x[y0..y1] at zoom z, plus a pixel halo."""

    z: int
    x0: int
    x1: int
    y0: int
    y1: int
    halo_px: int = 0

    def __post_init__(self):
        if self.z < 0:
            raise ValueError("zoom must be >= 0")
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError("tile rectangle is empty")
        n = 1 << self.z
        if not (0 <= self.x0 and self.x1 < n and 0 <= self.y0 and self.y1 < n):
            raise ValueError(f"tile rectangle outside zoom-{self.z} pyramid")
        if self.halo_px < 0:
            raise ValueError("halo_px must be >= 0")


@dataclass(frozen=True)
class AssembledRegion:
    """Stitched pixels, their mosaic origin, and any tiles that were absent."""

    pixels: np.ndarray
    origin: PixelPoint
    missing: tuple[TileCoord, ...] = ()


def low_information(tile: np.ndarray, stddev_threshold: float = 4.0) -> bool:
    """True when the tile is too flat to be worth scanning (strict <)."""
    return float(np.asarray(tile, dtype=np.float64).std()) < stddev_threshold


def _decode_gray(raw: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(raw)) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except Exception as exc:
        raise DecodeError(f"undecodable tile bytes ({exc})") from exc


def _default_http_get(url: str, timeout: float) -> tuple[int, bytes, str | None]:
    req = urllib.request.Request(url, headers={"User-Agent": "facescan/0.1"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read(), resp.headers.get("ETag")
    except urllib.error.HTTPError as exc:
        return exc.code, b"", None


class _TokenBucket:
    """Global request throttle: ``rate`` tokens/s, burst capacity ``rate``."""

    def __init__(self, rate: float, clock: Callable[[], float], sleep: Callable[[float], None]):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = rate
        self.tokens = rate
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self.tokens = min(self.capacity, self.tokens + (now - self._last) * self.rate)
                self._last = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self._sleep(wait)


class TileFetcher:
    """Fetches tiles for one source with caching, retry, and rate limiting.

    ``sleep`` and ``clock`` are injectable so tests can observe backoff
    schedules without real delays. ``http_get`` may be replaced to stub the
    network. Thread-safe; concurrent requests for the same coordinate
    coalesce onto one fetch.
    """

    def __init__(
        self,
        spec: TileSourceSpec,
        cache_dir: str | os.PathLike | None = None,
        *,
        rate: float = 10.0,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
        fixtures: FixtureTileServer | None = None,
        http_get: Callable[[str, float], tuple[int, bytes, str | None]] | None = None,
        http_timeout: float = 20.0,
    ):
        self.spec = spec
        root = cache_dir if cache_dir is not None else os.environ.get("FACESCAN_CACHE_DIR", "cache")
        self.cache_root = Path(root)
        self._sleep = sleep
        self._bucket = _TokenBucket(rate, clock, sleep)
        self._fixtures = fixtures if fixtures is not None else DEFAULT_FIXTURES
        self._http_get = http_get if http_get is not None else _default_http_get
        self._http_timeout = http_timeout
        self._locks: dict[tuple[int, int, int], threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- cache ------------------------------------------------------------

    def cache_path(self, coord: TileCoord) -> Path:
        return self.cache_root / self.spec.layer / str(coord.z) / str(coord.x) / f"{coord.y}.png"

    def _cache_load(self, coord: TileCoord) -> TileData | None:
        path = self.cache_path(coord)
        if not path.is_file():
            return None
        try:
            pixels = _decode_gray(path.read_bytes())
        except DecodeError:
            return None  # corrupt cache entry: refetch
        return TileData(coord=coord, pixels=pixels, fetched_at=path.stat().st_mtime)

    def _cache_store(self, coord: TileCoord, pixels: np.ndarray) -> None:
        path = self.cache_path(coord)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="L").save(buf, format="PNG")
        tmp.write_bytes(buf.getvalue())
        os.replace(tmp, path)

    # -- single raw attempt per source kind --------------------------------

    def _attempt(self, coord: TileCoord) -> tuple[np.ndarray, str | None]:
        kind = self.spec.kind
        if kind is SourceKind.FIXTURE:
            try:
                pixels = self._fixtures.render(self.spec.uri, coord.z, coord.x, coord.y, self.spec.tile_size)
            except FixtureError as exc:
                if exc.not_found:
                    raise TileNotFound(str(exc)) from exc
                raise _Transient(str(exc)) from exc
            return pixels, None
        if kind is SourceKind.LOCAL_DIR:
            if "{z}" in self.spec.uri:
                path = Path(self.spec.uri.format(z=coord.z, x=coord.x, y=coord.y))
            else:
                path = Path(self.spec.uri) / str(coord.z) / str(coord.x) / f"{coord.y}.png"
            if not path.is_file():
                raise TileNotFound(f"no tile file {path}")
            return _decode_gray(path.read_bytes()), None
        url = self.spec.uri.format(z=coord.z, x=coord.x, y=coord.y)
        try:
            status, raw, etag = self._http_get(url, self._http_timeout)
        except OSError as exc:
            raise _Transient(f"network error: {exc}") from exc
        if status == 404:
            raise TileNotFound(f"404 for {url}")
        if status >= 500 or status == 429:
            raise _Transient(f"status {status} for {url}")
        if status != 200:
            raise TileError(f"status {status} for {url}")
        return _decode_gray(raw), etag

    # -- public fetch ------------------------------------------------------

    def fetch(self, coord: TileCoord) -> TileData:
        if self.spec.max_zoom is not None and coord.z > self.spec.max_zoom:
            raise ValueError(f"zoom {coord.z} above source max_zoom {self.spec.max_zoom}")
        use_cache = self.spec.kind is not SourceKind.LOCAL_DIR
        if use_cache:
            hit = self._cache_load(coord)
            if hit is not None:
                return hit
        with self._coord_lock(coord):
            if use_cache:
                hit = self._cache_load(coord)  # a coalesced fetch may have landed
                if hit is not None:
                    return hit
            pixels, etag = self._fetch_with_retry(coord)
            if pixels.shape != (self.spec.tile_size, self.spec.tile_size):
                raise DecodeError(
                    f"tile {coord.z}/{coord.x}/{coord.y} decoded to {pixels.shape}, "
                    f"expected {(self.spec.tile_size,) * 2}"
                )
            if use_cache:
                self._cache_store(coord, pixels)
            return TileData(coord=coord, pixels=pixels, fetched_at=time.time(), source_etag=etag)

    def _fetch_with_retry(self, coord: TileCoord) -> tuple[np.ndarray, str | None]:
        last: _Transient | None = None
        for attempt in range(len(_BACKOFFS) + 1):
            if attempt > 0:
                self._sleep(_BACKOFFS[attempt - 1])
            self._bucket.acquire()
            try:
                return self._attempt(coord)
            except _Transient as exc:
                last = exc
        raise FetchExhausted(
            f"tile {coord.z}/{coord.x}/{coord.y}: {len(_BACKOFFS) + 1} attempts failed ({last})"
        )

    def _coord_lock(self, coord: TileCoord) -> threading.Lock:
        key = (coord.z, coord.x, coord.y)
        with self._locks_guard:
            lock = self._locks.get(key)
            if lock is None:
                lock = self._locks[key] = threading.Lock()
            return lock


class _Transient(Exception):
    """Internal marker: this attempt failed but a retry may succeed."""


def fetch_tile(spec: TileSourceSpec, coord: TileCoord, fetcher: TileFetcher | None = None, **kw) -> TileData:
    """One-shot fetch; pass a ``TileFetcher`` to share cache locks and rate state."""
    if fetcher is None:
        fetcher = TileFetcher(spec, **kw)
    return fetcher.fetch(coord)


def assemble_region(
    spec: TileSourceSpec,
    req: RegionRequest,
    fetcher: TileFetcher | None = None,
    **kw,
) -> AssembledRegion:
    """Stitch the requested tile rectangle plus halo into one image.

    The halo is clamped at mosaic edges. Tiles the source cannot provide are
    filled with 0 and reported in ``missing``; nothing here is fatal.
    """
    if fetcher is None:
        fetcher = TileFetcher(spec, **kw)
    ts = spec.tile_size
    size = mosaic_size_px(req.z, ts)
    px0 = max(0, req.x0 * ts - req.halo_px)
    py0 = max(0, req.y0 * ts - req.halo_px)
    px1 = min(size, (req.x1 + 1) * ts + req.halo_px)
    py1 = min(size, (req.y1 + 1) * ts + req.halo_px)
    out = np.zeros((py1 - py0, px1 - px0), dtype=np.uint8)
    missing: list[TileCoord] = []
    for ty in range(py0 // ts, (py1 - 1) // ts + 1):
        for tx in range(px0 // ts, (px1 - 1) // ts + 1):
            coord = TileCoord(req.z, tx, ty, spec.body, spec.layer)
            try:
                tile = fetcher.fetch(coord)
            except TileError:
                missing.append(coord)
                continue
            ox0, oy0 = tx * ts, ty * ts
            sx0, sy0 = max(px0, ox0), max(py0, oy0)
            sx1, sy1 = min(px1, ox0 + ts), min(py1, oy0 + ts)
            out[sy0 - py0 : sy1 - py0, sx0 - px0 : sx1 - px0] = tile.pixels[
                sy0 - oy0 : sy1 - oy0, sx0 - ox0 : sx1 - ox0
            ]
    return AssembledRegion(
        pixels=out,
        origin=PixelPoint(px0, py0, req.z, ts),
        missing=tuple(missing),
    )
