"""Planetary coordinate systems: tile addressing and pixel/geodetic conversion.

Supports square XYZ tile pyramids over three map projections:

* web_mercator        -- Earth web maps (spherical Mercator)
* equirectangular     -- global Mars/Moon mosaics (plate carree on a square pyramid)
* polar_stereographic -- lunar pole mosaics, north or south aspect

All bodies are treated as spheres; the pyramid at zoom z is a square of
``tile_size * 2**z`` pixels per side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "Body",
    "EARTH",
    "MARS",
    "MOON",
    "ProjectionKind",
    "Projection",
    "TileCoord",
    "LonLat",
    "PixelPoint",
    "MAX_MERCATOR_LAT_DEG",
    "mosaic_size_px",
    "tile_pixel_origin",
    "pixel_to_lonlat",
    "lonlat_to_pixel",
    "tile_lonlat_bounds",
]


@dataclass(frozen=True)
class Body:
    """A scanned celestial body, modelled as a sphere."""

    name: str
    radius_m: float

    def __post_init__(self):
        if self.radius_m <= 0:
            raise ValueError(f"body radius must be positive, got {self.radius_m}")


EARTH = Body("earth", 6378137.0)
MARS = Body("mars", 3396190.0)
MOON = Body("moon", 1737400.0)

BODIES = {b.name: b for b in (EARTH, MARS, MOON)}


class ProjectionKind(str, Enum):
    WEB_MERCATOR = "web_mercator"
    EQUIRECTANGULAR = "equirectangular"
    POLAR_STEREOGRAPHIC_NORTH = "polar_stereographic_north"
    POLAR_STEREOGRAPHIC_SOUTH = "polar_stereographic_south"


_POLAR_KINDS = (
    ProjectionKind.POLAR_STEREOGRAPHIC_NORTH,
    ProjectionKind.POLAR_STEREOGRAPHIC_SOUTH,
)

# Latitude where the square Mercator world cuts off: atan(sinh(pi)).
MAX_MERCATOR_LAT_DEG = math.degrees(math.atan(math.sinh(math.pi)))


def _default_polar_extent_m(body: Body) -> float:
    # Half-width covering poleward of |lat| = 60 deg at pole-tangent scale.
    return 2.0 * body.radius_m * math.tan(math.radians(15.0))


@dataclass(frozen=True)
class Projection:
    """A projection bound to a body.

    ``extent_m`` is the half-width of the mosaic in projected metres and only
    applies to the polar stereographic kinds, whose pole mosaics have bespoke
    extents. Defaults to covering poleward of 60 degrees.
    """

    kind: ProjectionKind
    body: Body
    extent_m: float | None = None

    def __post_init__(self):
        if self.kind is ProjectionKind.WEB_MERCATOR and self.body.name != "earth":
            raise ValueError("web_mercator is only defined for earth")
        if self.kind in _POLAR_KINDS and self.body.name != "moon":
            raise ValueError("polar stereographic mosaics are only defined for moon")
        if self.kind in _POLAR_KINDS and self.extent_m is None:
            object.__setattr__(self, "extent_m", _default_polar_extent_m(self.body))
        if self.extent_m is not None and self.extent_m <= 0:
            raise ValueError("extent_m must be positive")


@dataclass(frozen=True)
class TileCoord:
    """Address of one tile in a body-specific pyramid."""

    z: int
    x: int
    y: int
    body: Body
    layer: str

    def __post_init__(self):
        if self.z < 0:
            raise ValueError(f"zoom must be >= 0, got {self.z}")
        n = 1 << self.z
        if not (0 <= self.x < n and 0 <= self.y < n):
            raise ValueError(f"tile ({self.x},{self.y}) outside zoom-{self.z} pyramid")


@dataclass(frozen=True)
class LonLat:
    """Geodetic coordinates, lon in [-180, 180), lat in [-90, 90]."""

    lon_deg: float
    lat_deg: float

    def __post_init__(self):
        if not (-180.0 <= self.lon_deg < 180.0):
            raise ValueError(f"lon {self.lon_deg} outside [-180, 180)")
        if not (-90.0 <= self.lat_deg <= 90.0):
            raise ValueError(f"lat {self.lat_deg} outside [-90, 90]")


def normalize_lon(lon_deg: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    lon = math.fmod(lon_deg + 180.0, 360.0)
    if lon < 0:
        lon += 360.0
    return lon - 180.0


@dataclass(frozen=True)
class PixelPoint:
    """Global mosaic pixel coordinates at a given zoom."""

    px: float
    py: float
    zoom: int
    tile_size: int = 256


def mosaic_size_px(zoom: int, tile_size: int = 256) -> int:
    """Side length in pixels of the square mosaic at ``zoom``."""
    return tile_size * (1 << zoom)


def tile_pixel_origin(t: TileCoord, tile_size: int = 256) -> PixelPoint:
    """Top-left mosaic pixel of tile ``t``."""
    return PixelPoint(t.x * tile_size, t.y * tile_size, t.z, tile_size)


def _check_in_mosaic(p: PixelPoint) -> int:
    world = mosaic_size_px(p.zoom, p.tile_size)
    if not (0 <= p.px <= world and 0 <= p.py <= world):
        raise ValueError(f"pixel ({p.px},{p.py}) outside zoom-{p.zoom} mosaic of {world} px")
    return world


def pixel_to_lonlat(p: PixelPoint, proj: Projection) -> LonLat:
    """Geodetic coordinates of mosaic pixel ``p`` under ``proj``."""
    world = _check_in_mosaic(p)
    fx = p.px / world
    fy = p.py / world

    if proj.kind is ProjectionKind.EQUIRECTANGULAR:
        lon = -180.0 + 360.0 * fx
        lat = 90.0 - 180.0 * fy
    elif proj.kind is ProjectionKind.WEB_MERCATOR:
        lon = -180.0 + 360.0 * fx
        lat = math.degrees(math.atan(math.sinh(math.pi * (1.0 - 2.0 * fy))))
    else:
        ex = proj.extent_m
        xm = (2.0 * fx - 1.0) * ex
        ym = (1.0 - 2.0 * fy) * ex
        rho = math.hypot(xm, ym)
        two_r = 2.0 * proj.body.radius_m
        if proj.kind is ProjectionKind.POLAR_STEREOGRAPHIC_SOUTH:
            lon = math.degrees(math.atan2(xm, ym))
            lat = math.degrees(2.0 * math.atan(rho / two_r)) - 90.0
        else:
            lon = math.degrees(math.atan2(xm, -ym))
            lat = 90.0 - math.degrees(2.0 * math.atan(rho / two_r))

    return LonLat(normalize_lon(lon), min(90.0, max(-90.0, lat)))


def lonlat_to_pixel(g: LonLat, proj: Projection, zoom: int, tile_size: int = 256) -> PixelPoint:
    """Mosaic pixel of geodetic point ``g`` under ``proj`` at ``zoom``.

    Inverse of :func:`pixel_to_lonlat`. Raises for latitudes outside the
    Mercator clamp when ``proj`` is web_mercator.
    """
    world = mosaic_size_px(zoom, tile_size)
    lon = g.lon_deg
    lat = g.lat_deg

    if proj.kind is ProjectionKind.EQUIRECTANGULAR:
        fx = (lon + 180.0) / 360.0
        fy = (90.0 - lat) / 180.0
    elif proj.kind is ProjectionKind.WEB_MERCATOR:
        if abs(lat) > MAX_MERCATOR_LAT_DEG:
            raise ValueError(f"lat {lat} outside Mercator clamp +-{MAX_MERCATOR_LAT_DEG:.8f}")
        fx = (lon + 180.0) / 360.0
        phi = math.radians(lat)
        fy = (1.0 - math.asinh(math.tan(phi)) / math.pi) / 2.0
    else:
        ex = proj.extent_m
        two_r = 2.0 * proj.body.radius_m
        lam = math.radians(lon)
        if proj.kind is ProjectionKind.POLAR_STEREOGRAPHIC_SOUTH:
            rho = two_r * math.tan(math.radians(lat + 90.0) / 2.0)
            xm = rho * math.sin(lam)
            ym = rho * math.cos(lam)
        else:
            rho = two_r * math.tan(math.radians(90.0 - lat) / 2.0)
            xm = rho * math.sin(lam)
            ym = -rho * math.cos(lam)
        fx = (xm / ex + 1.0) / 2.0
        fy = (1.0 - ym / ex) / 2.0

    p = PixelPoint(fx * world, fy * world, zoom, tile_size)
    _check_in_mosaic(p)
    return p


def tile_lonlat_bounds(
    t: TileCoord, proj: Projection, tile_size: int = 256
) -> tuple[float, float, float, float]:
    """Conservative geodetic bounds (lon_min, lat_min, lon_max, lat_max) of tile ``t``.

    Exact for the separable projections; for the polar kinds the longitude
    range is the full circle and latitudes come from the pole-distance range
    over the tile, so the box contains but may exceed the true footprint.
    """
    x0 = t.x * tile_size
    y0 = t.y * tile_size
    x1 = x0 + tile_size
    y1 = y0 + tile_size

    if proj.kind in (ProjectionKind.EQUIRECTANGULAR, ProjectionKind.WEB_MERCATOR):
        nw = pixel_to_lonlat(PixelPoint(x0, y0, t.z, tile_size), proj)
        se = pixel_to_lonlat(PixelPoint(x1, y1, t.z, tile_size), proj)
        lon_max = 180.0 if t.x == (1 << t.z) - 1 else se.lon_deg
        return nw.lon_deg, se.lat_deg, lon_max, nw.lat_deg

    world = mosaic_size_px(t.z, tile_size)
    half = world / 2.0
    # Distance from the pole pixel to the tile rectangle, in pixels.
    dx_min = max(x0 - half, half - x1, 0.0)
    dy_min = max(y0 - half, half - y1, 0.0)
    rho_min_px = math.hypot(dx_min, dy_min)
    rho_max_px = max(
        math.hypot(cx - half, cy - half) for cx in (x0, x1) for cy in (y0, y1)
    )
    two_r = 2.0 * proj.body.radius_m
    m_per_px = 2.0 * proj.extent_m / world
    lat_near = math.degrees(2.0 * math.atan(rho_min_px * m_per_px / two_r))
    lat_far = math.degrees(2.0 * math.atan(rho_max_px * m_per_px / two_r))
    if proj.kind is ProjectionKind.POLAR_STEREOGRAPHIC_SOUTH:
        return -180.0, lat_near - 90.0, 180.0, lat_far - 90.0
    return -180.0, 90.0 - lat_far, 180.0, 90.0 - lat_near
