import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facescan.geo import (
    EARTH,
    MARS,
    MOON,
    MAX_MERCATOR_LAT_DEG,
    Body,
    LonLat,
    PixelPoint,
    Projection,
    ProjectionKind,
    TileCoord,
    lonlat_to_pixel,
    mosaic_size_px,
    normalize_lon,
    pixel_to_lonlat,
    tile_lonlat_bounds,
    tile_pixel_origin,
)

EQUIRECT_MARS = Projection(ProjectionKind.EQUIRECTANGULAR, MARS)
MERCATOR = Projection(ProjectionKind.WEB_MERCATOR, EARTH)
POLAR_S = Projection(ProjectionKind.POLAR_STEREOGRAPHIC_SOUTH, MOON)
POLAR_N = Projection(ProjectionKind.POLAR_STEREOGRAPHIC_NORTH, MOON)

ALL_PROJECTIONS = [EQUIRECT_MARS, MERCATOR, POLAR_S, POLAR_N]


def test_body_radii():
    assert EARTH.radius_m == 6378137.0
    assert MARS.radius_m == 3396190.0
    assert MOON.radius_m == 1737400.0
    with pytest.raises(ValueError):
        Body("flatland", -1.0)


def test_projection_validity_rules():
    with pytest.raises(ValueError):
        Projection(ProjectionKind.WEB_MERCATOR, MARS)
    with pytest.raises(ValueError):
        Projection(ProjectionKind.POLAR_STEREOGRAPHIC_SOUTH, EARTH)
    # equirectangular is valid everywhere
    for body in (EARTH, MARS, MOON):
        Projection(ProjectionKind.EQUIRECTANGULAR, body)


def test_tile_coord_bounds():
    TileCoord(3, 7, 0, MOON, "global")
    with pytest.raises(ValueError):
        TileCoord(3, 8, 0, MOON, "global")
    with pytest.raises(ValueError):
        TileCoord(0, 0, -1, MOON, "global")


def test_tile_pixel_origin():
    assert tile_pixel_origin(TileCoord(0, 0, 0, MARS, "g"), 256) == PixelPoint(0, 0, 0, 256)
    assert tile_pixel_origin(TileCoord(2, 3, 1, MARS, "g"), 256) == PixelPoint(768, 256, 2, 256)
    assert tile_pixel_origin(TileCoord(5, 31, 31, MARS, "g"), 256) == PixelPoint(7936, 7936, 5, 256)


def test_equirect_center_pixel_is_origin():
    g = pixel_to_lonlat(PixelPoint(128, 128, 0), EQUIRECT_MARS)
    assert g.lon_deg == pytest.approx(0.0, abs=1e-12)
    assert g.lat_deg == pytest.approx(0.0, abs=1e-12)


def test_equirect_left_edge_mid_height():
    p = lonlat_to_pixel(LonLat(-180.0, 0.0), EQUIRECT_MARS, zoom=1)
    assert p.px == pytest.approx(0.0, abs=1e-9)
    assert p.py == pytest.approx(256.0, abs=1e-9)


def test_mercator_top_edge_latitude():
    g = pixel_to_lonlat(PixelPoint(128, 0, 0), MERCATOR)
    assert g.lat_deg == pytest.approx(85.05112878, abs=1e-7)
    assert g.lat_deg == pytest.approx(math.degrees(math.atan(math.sinh(math.pi))), abs=1e-12)


def test_mercator_rejects_polar_latitude():
    with pytest.raises(ValueError):
        lonlat_to_pixel(LonLat(0.0, 89.0), MERCATOR, zoom=2)


def test_polar_south_near_pole_maps_near_center():
    # Evaluate the forward formula numerically: at lat -89.9 the pole distance
    # rho = 2R*tan(0.05 deg) metres, a tiny fraction of the mosaic extent.
    zoom = 4
    world = mosaic_size_px(zoom)
    p = lonlat_to_pixel(LonLat(0.0, -89.9), POLAR_S, zoom=zoom)
    rho_m = 2.0 * MOON.radius_m * math.tan(math.radians(0.05))
    expected_off_px = rho_m / (2.0 * POLAR_S.extent_m) * world
    assert math.hypot(p.px - world / 2, p.py - world / 2) == pytest.approx(expected_off_px, rel=1e-9)
    assert expected_off_px < world / 100


def _random_lonlats(rng, n, proj):
    lons = rng.uniform(-180.0, 180.0 - 1e-9, n)
    if proj.kind is ProjectionKind.WEB_MERCATOR:
        lats = rng.uniform(-MAX_MERCATOR_LAT_DEG, MAX_MERCATOR_LAT_DEG, n)
    elif proj.kind is ProjectionKind.POLAR_STEREOGRAPHIC_SOUTH:
        lats = rng.uniform(-89.999, -60.0, n)
    elif proj.kind is ProjectionKind.POLAR_STEREOGRAPHIC_NORTH:
        lats = rng.uniform(60.0, 89.999, n)
    else:
        lats = rng.uniform(-90.0, 90.0, n)
    return lons, lats


@pytest.mark.parametrize("proj", ALL_PROJECTIONS, ids=lambda p: p.kind.value)
def test_round_trip_10k_points(proj):
    rng = np.random.default_rng(12345)
    n = 10_000
    zoom = 6
    world = mosaic_size_px(zoom)

    # pixel -> lonlat -> pixel, < 1e-6 px
    if proj.kind in (ProjectionKind.POLAR_STEREOGRAPHIC_SOUTH, ProjectionKind.POLAR_STEREOGRAPHIC_NORTH):
        # stay off the exact pole, where longitude is undefined
        pxs = rng.uniform(0, world, n)
        pys = rng.uniform(0, world, n)
        keep = np.hypot(pxs - world / 2, pys - world / 2) > 1e-3
        pxs, pys = pxs[keep], pys[keep]
    else:
        pxs = rng.uniform(0, world, n)
        pys = rng.uniform(world * 1e-6, world * (1 - 1e-6), n)
    for px, py in zip(pxs, pys):
        g = pixel_to_lonlat(PixelPoint(px, py, zoom), proj)
        p2 = lonlat_to_pixel(g, proj, zoom)
        assert abs(p2.px - px) < 1e-6 and abs(p2.py - py) < 1e-6

    # lonlat -> pixel -> lonlat, < 1e-9 deg
    lons, lats = _random_lonlats(rng, n, proj)
    for lon, lat in zip(lons, lats):
        p = lonlat_to_pixel(LonLat(lon, lat), proj, zoom)
        g2 = pixel_to_lonlat(p, proj)
        assert abs(g2.lon_deg - lon) < 1e-9
        assert abs(g2.lat_deg - lat) < 1e-9


def test_equirect_monotonicity():
    zoom = 3
    lats = np.linspace(-89.9, 89.9, 50)
    lons = np.linspace(-180.0, 179.9, 50)
    pxs = [lonlat_to_pixel(LonLat(lon, 0.0), EQUIRECT_MARS, zoom).px for lon in lons]
    pys = [lonlat_to_pixel(LonLat(0.0, lat), EQUIRECT_MARS, zoom).py for lat in lats]
    assert all(b > a for a, b in zip(pxs, pxs[1:]))
    assert all(b < a for a, b in zip(pys, pys[1:]))


@settings(max_examples=200, deadline=None)
@given(
    z=st.integers(min_value=0, max_value=7),
    fx=st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
    fy=st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
    proj_idx=st.integers(min_value=0, max_value=3),
)
def test_tile_containment(z, fx, fy, proj_idx):
    # every pixel inside tile t maps into the published lonlat bounds of t
    proj = ALL_PROJECTIONS[proj_idx]
    n = 1 << z
    rng = np.random.default_rng(z * 1000003 + proj_idx)
    tx, ty = int(rng.integers(0, n)), int(rng.integers(0, n))
    t = TileCoord(z, tx, ty, proj.body, "layer")
    lon_min, lat_min, lon_max, lat_max = tile_lonlat_bounds(t, proj)
    px = (tx + fx) * 256
    py = (ty + fy) * 256
    if proj.kind in (ProjectionKind.POLAR_STEREOGRAPHIC_SOUTH, ProjectionKind.POLAR_STEREOGRAPHIC_NORTH):
        world = mosaic_size_px(z)
        if math.hypot(px - world / 2, py - world / 2) < 1e-9:
            return  # lon undefined at the exact pole
    g = pixel_to_lonlat(PixelPoint(px, py, z), proj)
    eps = 1e-9
    assert lat_min - eps <= g.lat_deg <= lat_max + eps
    assert lon_min - eps <= g.lon_deg <= lon_max + eps


def test_normalize_lon():
    assert normalize_lon(180.0) == -180.0
    assert normalize_lon(-180.0) == -180.0
    assert normalize_lon(540.0) == -180.0
    assert normalize_lon(0.0) == 0.0
