"""Tile acquisition and mosaic assembly."""

from facescan.tiles.client import (
    AssembledRegion,
    DecodeError,
    FetchExhausted,
    RegionRequest,
    SourceKind,
    TileData,
    TileError,
    TileFetcher,
    TileNotFound,
    TileSourceSpec,
    assemble_region,
    fetch_tile,
    low_information,
)
from facescan.tiles.fixtures import (
    DEFAULT_FIXTURES,
    FixtureError,
    FixtureTileServer,
    Plant,
    planted_maker,
    terrain_maker,
)

__all__ = [
    "AssembledRegion",
    "DecodeError",
    "DEFAULT_FIXTURES",
    "FetchExhausted",
    "FixtureError",
    "FixtureTileServer",
    "Plant",
    "planted_maker",
    "RegionRequest",
    "SourceKind",
    "terrain_maker",
    "TileData",
    "TileError",
    "TileFetcher",
    "TileNotFound",
    "TileSourceSpec",
    "assemble_region",
    "fetch_tile",
    "low_information",
]
