"""Tile source, cache, retry, and region stitching tests."""

import io
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from facescan.geo import MARS, TileCoord, tile_pixel_origin
from facescan.tiles import (
    FetchExhausted,
    FixtureError,
    FixtureTileServer,
    Plant,
    RegionRequest,
    SourceKind,
    TileFetcher,
    TileNotFound,
    TileSourceSpec,
    assemble_region,
    fetch_tile,
    low_information,
    planted_maker,
    terrain_maker,
)


class FakeTime:
    """Deterministic clock; sleeping advances it and records the request."""

    def __init__(self, start=1000.0):
        self.t = start
        self.sleeps = []

    def clock(self):
        return self.t

    def sleep(self, dt):
        self.sleeps.append(dt)
        self.t += dt


def fixture_spec(layer="terrain", **kw):
    return TileSourceSpec(kind=SourceKind.FIXTURE, uri=layer, layer=layer, body=MARS, **kw)


def make_fetcher(tmp_path, layer="terrain", srv=None, **kw):
    srv = srv if srv is not None else FixtureTileServer()
    ft = FakeTime()
    spec = fixture_spec(layer)
    fetcher = TileFetcher(spec, cache_dir=tmp_path, sleep=ft.sleep, clock=ft.clock, fixtures=srv, **kw)
    return spec, fetcher, srv, ft


def coord(z, x, y, layer="terrain"):
    return TileCoord(z, x, y, MARS, layer)


def png_bytes(arr):
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


# -- fetch & cache ---------------------------------------------------------


def test_fixture_fetch_deterministic(tmp_path):
    spec, fetcher, srv, _ = make_fetcher(tmp_path)
    a = fetcher.fetch(coord(3, 2, 1))
    b = FixtureTileServer().render("terrain", 3, 2, 1)
    assert a.pixels.shape == (256, 256)
    assert np.array_equal(a.pixels, b)


def test_second_fetch_zero_network_calls(tmp_path):
    spec, fetcher, srv, _ = make_fetcher(tmp_path)
    first = fetcher.fetch(coord(2, 1, 1))
    assert srv.call_count("terrain", 2, 1, 1) == 1
    second = fetcher.fetch(coord(2, 1, 1))
    assert srv.call_count("terrain", 2, 1, 1) == 1
    assert np.array_equal(first.pixels, second.pixels)


def test_cache_round_trip_bit_identical(tmp_path):
    spec, fetcher, srv, _ = make_fetcher(tmp_path)
    original = fetcher.fetch(coord(4, 5, 6)).pixels
    # a brand new fetcher over the same cache dir must not re-render
    spec2, fetcher2, srv2, _ = make_fetcher(tmp_path)
    again = fetcher2.fetch(coord(4, 5, 6)).pixels
    assert srv2.total_calls == 0
    assert np.array_equal(original, again)


def test_cache_layout(tmp_path):
    spec, fetcher, srv, _ = make_fetcher(tmp_path)
    fetcher.fetch(coord(3, 6, 2))
    assert (tmp_path / "terrain" / "3" / "6" / "2.png").is_file()


def test_cache_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("FACESCAN_CACHE_DIR", str(tmp_path / "envcache"))
    fetcher = TileFetcher(fixture_spec(), fixtures=FixtureTileServer())
    fetcher.fetch(coord(1, 0, 0))
    assert (tmp_path / "envcache" / "terrain" / "1" / "0" / "0.png").is_file()


def test_fetch_tile_convenience(tmp_path):
    spec = fixture_spec("gradient")
    data = fetch_tile(spec, coord(2, 0, 0, "gradient"), cache_dir=tmp_path, fixtures=FixtureTileServer())
    assert data.pixels.shape == (256, 256)
    assert data.coord == coord(2, 0, 0, "gradient")


# -- retry schedule ---------------------------------------------------------


def test_fail_twice_then_succeed_after_three_attempts(tmp_path):
    spec, fetcher, srv, ft = make_fetcher(tmp_path)
    srv.script_failures("terrain", 2, 1, 0, [FixtureError("flaky"), FixtureError("flaky")])
    data = fetcher.fetch(coord(2, 1, 0))
    assert srv.call_count("terrain", 2, 1, 0) == 3
    assert ft.sleeps == [0.5, 1.0]
    assert data.pixels.shape == (256, 256)


def test_exhausted_after_four_attempts(tmp_path):
    spec, fetcher, srv, ft = make_fetcher(tmp_path)
    srv.script_failures("terrain", 2, 0, 0, [FixtureError("down")] * 10)
    with pytest.raises(FetchExhausted):
        fetcher.fetch(coord(2, 0, 0))
    assert srv.call_count("terrain", 2, 0, 0) == 4
    assert ft.sleeps == [0.5, 1.0, 2.0]


def test_not_found_is_not_retried(tmp_path):
    spec, fetcher, srv, ft = make_fetcher(tmp_path)
    srv.script_failures("terrain", 3, 0, 0, [FixtureError("gap", transient=False, not_found=True)])
    with pytest.raises(TileNotFound):
        fetcher.fetch(coord(3, 0, 0))
    assert srv.call_count("terrain", 3, 0, 0) == 1
    assert ft.sleeps == []


def test_rate_limit_spaces_requests(tmp_path):
    spec, fetcher, srv, ft = make_fetcher(tmp_path, rate=1.0)
    fetcher.fetch(coord(3, 0, 0))
    fetcher.fetch(coord(3, 1, 0))
    fetcher.fetch(coord(3, 2, 0))
    # burst capacity 1: second and third fetches each wait out one token
    assert len(ft.sleeps) == 2
    assert all(abs(s - 1.0) < 1e-9 for s in ft.sleeps)


def test_single_flight_coalesces(tmp_path):
    srv = FixtureTileServer()
    spec = fixture_spec()
    fetcher = TileFetcher(spec, cache_dir=tmp_path, fixtures=srv)
    results = []
    barrier = threading.Barrier(6)

    def run():
        barrier.wait()
        results.append(fetcher.fetch(coord(5, 7, 9)).pixels)

    threads = [threading.Thread(target=run) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert srv.call_count("terrain", 5, 7, 9) == 1
    assert all(np.array_equal(results[0], r) for r in results[1:])


# -- other source kinds ------------------------------------------------------


def test_local_dir_source(tmp_path):
    tile = (np.arange(256 * 256, dtype=np.int64) % 251).astype(np.uint8).reshape(256, 256)
    root = tmp_path / "tiles"
    (root / "2" / "1").mkdir(parents=True)
    (root / "2" / "1" / "3.png").write_bytes(png_bytes(tile))
    spec = TileSourceSpec(kind=SourceKind.LOCAL_DIR, uri=str(root), layer="disk", body=MARS)
    fetcher = TileFetcher(spec, cache_dir=tmp_path / "cache")
    got = fetcher.fetch(TileCoord(2, 1, 3, MARS, "disk"))
    assert np.array_equal(got.pixels, tile)
    with pytest.raises(TileNotFound):
        fetcher.fetch(TileCoord(2, 0, 0, MARS, "disk"))


def test_http_source_stub(tmp_path):
    tile = np.full((256, 256), 120, dtype=np.uint8)
    calls = []

    def fake_get(url, timeout):
        calls.append(url)
        if "/9/" in url:
            return 404, b"", None
        if len(calls) <= 2:
            return 503, b"", None
        return 200, png_bytes(tile), "etag-1"

    ft = FakeTime()
    spec = TileSourceSpec(
        kind=SourceKind.HTTP_TEMPLATE,
        uri="https://tiles.test/wms/{z}/{x}/{y}.png",
        layer="web",
        body=MARS,
    )
    fetcher = TileFetcher(spec, cache_dir=tmp_path, sleep=ft.sleep, clock=ft.clock, http_get=fake_get)
    got = fetcher.fetch(TileCoord(3, 4, 5, MARS, "web"))
    assert np.array_equal(got.pixels, tile)
    assert got.source_etag == "etag-1"
    assert calls[0] == "https://tiles.test/wms/3/4/5.png"
    assert len(calls) == 3  # two 503s then success
    with pytest.raises(TileNotFound):
        fetcher.fetch(TileCoord(4, 9, 9, MARS, "web"))


def test_spec_validation():
    with pytest.raises(ValueError):
        TileSourceSpec(kind=SourceKind.FIXTURE, uri="terrain", layer="t", body=MARS, tile_size=300)
    with pytest.raises(ValueError):
        TileSourceSpec(
            kind=SourceKind.HTTP_TEMPLATE, uri="https://t.test/{z}/{x}.png", layer="t", body=MARS
        )
    with pytest.raises(ValueError):
        TileSourceSpec(kind=SourceKind.FIXTURE, uri="terrain", layer="", body=MARS)


def test_region_request_validation():
    with pytest.raises(ValueError):
        RegionRequest(z=2, x0=1, x1=0, y0=0, y1=0)
    with pytest.raises(ValueError):
        RegionRequest(z=2, x0=0, x1=0, y0=0, y1=0, halo_px=-1)
    with pytest.raises(ValueError):
        RegionRequest(z=1, x0=0, x1=2, y0=0, y1=0)


# -- assembly ----------------------------------------------------------------


def test_assemble_single_tile_identity(tmp_path):
    spec, fetcher, srv, _ = make_fetcher(tmp_path)
    region = assemble_region(spec, RegionRequest(z=3, x0=2, x1=2, y0=1, y1=1), fetcher)
    tile = fetcher.fetch(coord(3, 2, 1))
    assert np.array_equal(region.pixels, tile.pixels)
    assert region.origin == tile_pixel_origin(coord(3, 2, 1))
    assert region.missing == ()


def test_assemble_gradient_seamless(tmp_path):
    spec, fetcher, srv, _ = make_fetcher(tmp_path, layer="gradient")
    region = assemble_region(spec, RegionRequest(z=2, x0=1, x1=2, y0=1, y1=2), fetcher)
    img = region.pixels.astype(int)
    assert img.shape == (512, 512)
    # smooth source: no stitched jump may exceed the layer's own pixel slope
    col_jumps = np.abs(np.diff(img, axis=1)).max()
    row_jumps = np.abs(np.diff(img, axis=0)).max()
    assert col_jumps <= 3
    assert row_jumps <= 3


def test_assemble_halo_corner_clamp(tmp_path):
    spec, fetcher, srv, _ = make_fetcher(tmp_path)
    region = assemble_region(spec, RegionRequest(z=2, x0=0, x1=0, y0=0, y1=0, halo_px=48), fetcher)
    # clamped at the mosaic corner: nothing above or left of (0,0)
    assert region.origin.px == 0 and region.origin.py == 0
    assert region.pixels.shape == (256 + 48, 256 + 48)
    # interior edge gets the full halo
    inner = assemble_region(spec, RegionRequest(z=2, x0=1, x1=1, y0=1, y1=1, halo_px=48), fetcher)
    assert inner.origin.px == 256 - 48 and inner.origin.py == 256 - 48
    assert inner.pixels.shape == (256 + 96, 256 + 96)


def test_assemble_missing_tiles_blank_filled(tmp_path):
    spec, fetcher, srv, _ = make_fetcher(tmp_path)
    srv.script_failures("terrain", 1, 1, 0, [FixtureError("gap", transient=False, not_found=True)])
    region = assemble_region(spec, RegionRequest(z=1, x0=0, x1=1, y0=0, y1=1), fetcher)
    assert region.missing == (coord(1, 1, 0),)
    assert region.pixels[:256, 256:].max() == 0
    assert region.pixels[:256, :256].std() > 0


@settings(max_examples=25, deadline=None)
@given(
    x0=st.integers(0, 6),
    y0=st.integers(0, 6),
    w=st.integers(0, 1),
    h=st.integers(0, 1),
    halo=st.integers(0, 64),
    data=st.data(),
)
def test_assemble_stitch_property(tmp_path_factory, x0, y0, w, h, halo, data):
    """Every assembled pixel equals the covering tile's pixel at that offset."""
    cache = tmp_path_factory.mktemp("stitch")
    srv = FixtureTileServer()
    spec = fixture_spec("coords")
    fetcher = TileFetcher(spec, cache_dir=cache, fixtures=srv)
    req = RegionRequest(z=3, x0=x0, x1=x0 + w, y0=y0, y1=y0 + h, halo_px=halo)
    region = assemble_region(spec, req, fetcher)
    hgt, wid = region.pixels.shape
    ox, oy = int(region.origin.px), int(region.origin.py)
    for _ in range(12):
        ly = data.draw(st.integers(0, hgt - 1))
        lx = data.draw(st.integers(0, wid - 1))
        gx, gy = ox + lx, oy + ly
        tile = srv.render("coords", 3, gx // 256, gy // 256)
        assert region.pixels[ly, lx] == tile[gy % 256, gx % 256]


def test_halo_keeps_boundary_face_whole(tmp_path):
    # a 48 px icon straddling the seam between tiles (1,1) and (2,1) at z=3
    srv = FixtureTileServer()
    srv.register("planted", planted_maker(terrain_maker(0), [Plant(z=3, px=500, py=260, size=48, seed=5)]))
    spec = fixture_spec("planted")
    fetcher = TileFetcher(spec, cache_dir=tmp_path, fixtures=srv)
    region = assemble_region(spec, RegionRequest(z=3, x0=1, x1=1, y0=1, y1=1, halo_px=48), fetcher)
    ox, oy = int(region.origin.px), int(region.origin.py)
    assert ox <= 500 and 500 + 48 <= ox + region.pixels.shape[1]
    icon = region.pixels[260 - oy : 308 - oy, 500 - ox : 548 - ox]
    left = srv.render("planted", 3, 1, 1)[4:52, 244:256]
    right = srv.render("planted", 3, 2, 1)[4:52, 0:36]
    assert np.array_equal(icon, np.hstack([left, right]))


# -- low information ---------------------------------------------------------


def test_low_information_constant_tile():
    assert low_information(np.full((256, 256), 93, dtype=np.uint8)) is True


def test_low_information_noise_tile():
    tile = FixtureTileServer().render("noise:3", 0, 0, 0)
    # uniform byte noise: stddev near sqrt((256**2 - 1) / 12) ~ 73.9
    assert abs(float(tile.std()) - 73.9) < 2.5
    assert low_information(tile) is False


def test_low_information_zero_threshold():
    assert low_information(np.zeros((64, 64), dtype=np.uint8), stddev_threshold=0.0) is False
