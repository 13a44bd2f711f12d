"""Scan jobs and their partition into leasable work units.

A job names one or more pixel-rectangle regions, each bound to a tile
source, plus the detector ensemble to run. ``partition`` cuts every region
along a tile-aligned block lattice (``unit_tiles`` tiles on a side,
default 8) and clips blocks to the region, so unit pixel areas are pairwise
disjoint and sum exactly to the job's pixel area.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from facescan.classifier import Cascade, dumps_model, parses_model
from facescan.detector import ScanParams
from facescan.geo import Body, mosaic_size_px
from facescan.tiles import SourceKind, TileSourceSpec

__all__ = [
    "DEFAULT_JOB_MAX_WINDOW",
    "JobRegion",
    "ScanJob",
    "WorkUnit",
    "partition",
    "job_to_doc",
    "job_from_doc",
]

# jobs need a finite scan ceiling: it doubles as the stitch halo
DEFAULT_JOB_MAX_WINDOW = 96


@dataclass(frozen=True)
class JobRegion:
    """A pixel rectangle at one zoom of one tile source."""

    source: TileSourceSpec
    zoom: int
    px0: int
    py0: int
    width: int
    height: int

    def __post_init__(self):
        if self.zoom < 0:
            raise ValueError("zoom must be >= 0")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("region must be non-empty")
        size = mosaic_size_px(self.zoom, self.source.tile_size)
        if not (0 <= self.px0 and self.px0 + self.width <= size):
            raise ValueError(f"region x range outside zoom-{self.zoom} mosaic")
        if not (0 <= self.py0 and self.py0 + self.height <= size):
            raise ValueError(f"region y range outside zoom-{self.zoom} mosaic")
        if self.source.max_zoom is not None and self.zoom > self.source.max_zoom:
            raise ValueError("region zoom exceeds source max_zoom")

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class ScanJob:
    """Everything needed to scan a set of regions with an ensemble."""

    job_id: str
    regions: tuple[JobRegion, ...]
    detectors: tuple[tuple[str, Cascade], ...]
    params: ScanParams = field(default_factory=ScanParams)
    unit_tiles: int = 8
    min_neighbors: int = 2
    group_iou: float = 0.3
    dedup_iou: float = 0.6

    def __post_init__(self):
        if not self.job_id:
            raise ValueError("job_id must be non-empty")
        if not self.regions:
            raise ValueError("job needs at least one region")
        if not (1 <= len(self.detectors) <= 3):
            raise ValueError("job needs 1 to 3 detectors")
        ids = [d for d, _ in self.detectors]
        if len(set(ids)) != len(ids):
            raise ValueError("detector ids must be unique")
        if self.unit_tiles < 1:
            raise ValueError("unit_tiles must be >= 1")
        if self.params.max_window is None:
            object.__setattr__(self, "params", replace(self.params, max_window=DEFAULT_JOB_MAX_WINDOW))

    @property
    def halo_px(self) -> int:
        """Stitch halo: the largest window the scan can request."""
        return int(self.params.max_window)

    @property
    def area(self) -> int:
        return sum(r.area for r in self.regions)


@dataclass
class WorkUnit:
    """One leasable block: a clipped pixel rectangle inside one region."""

    unit_id: str
    job_id: str
    region_index: int
    zoom: int
    px0: int
    py0: int
    width: int
    height: int
    status: str = "pending"
    lease_expiry: float | None = None
    attempt: int = 0

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains_center(self, cx: float, cy: float) -> bool:
        return self.px0 <= cx < self.px0 + self.width and self.py0 <= cy < self.py0 + self.height

    def to_doc(self) -> dict:
        return {
            "unit_id": self.unit_id,
            "job_id": self.job_id,
            "region_index": self.region_index,
            "zoom": self.zoom,
            "px0": self.px0,
            "py0": self.py0,
            "width": self.width,
            "height": self.height,
            "attempt": self.attempt,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "WorkUnit":
        return cls(
            unit_id=doc["unit_id"],
            job_id=doc["job_id"],
            region_index=int(doc["region_index"]),
            zoom=int(doc["zoom"]),
            px0=int(doc["px0"]),
            py0=int(doc["py0"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
            attempt=int(doc.get("attempt", 0)),
        )


def job_to_doc(job: ScanJob) -> dict:
    """JSON-compatible job description, models inlined as text."""
    p = job.params
    return {
        "job_id": job.job_id,
        "unit_tiles": job.unit_tiles,
        "min_neighbors": job.min_neighbors,
        "group_iou": job.group_iou,
        "dedup_iou": job.dedup_iou,
        "params": {
            "scale_start": p.scale_start,
            "scale_factor": p.scale_factor,
            "step_base": p.step_base,
            "min_window": p.min_window,
            "max_window": p.max_window,
            "skip_low_variance": p.skip_low_variance,
            "min_stddev": p.min_stddev,
        },
        "detectors": [{"id": d, "model": dumps_model(c)} for d, c in job.detectors],
        "regions": [
            {
                "kind": r.source.kind.value,
                "uri": r.source.uri,
                "layer": r.source.layer,
                "body": r.source.body.name,
                "body_radius_m": r.source.body.radius_m,
                "projection": r.source.projection,
                "tile_size": r.source.tile_size,
                "max_zoom": r.source.max_zoom,
                "zoom": r.zoom,
                "px0": r.px0,
                "py0": r.py0,
                "width": r.width,
                "height": r.height,
            }
            for r in job.regions
        ],
    }


def job_from_doc(doc: Mapping) -> ScanJob:
    p = doc["params"]
    params = ScanParams(
        scale_start=float(p["scale_start"]),
        scale_factor=float(p["scale_factor"]),
        step_base=float(p["step_base"]),
        min_window=None if p["min_window"] is None else int(p["min_window"]),
        max_window=None if p["max_window"] is None else int(p["max_window"]),
        skip_low_variance=bool(p["skip_low_variance"]),
        min_stddev=float(p["min_stddev"]),
    )
    regions = []
    for r in doc["regions"]:
        spec = TileSourceSpec(
            kind=SourceKind(r["kind"]),
            uri=r["uri"],
            layer=r["layer"],
            body=Body(r["body"], float(r["body_radius_m"])),
            projection=r["projection"],
            tile_size=int(r["tile_size"]),
            max_zoom=None if r["max_zoom"] is None else int(r["max_zoom"]),
        )
        regions.append(
            JobRegion(
                source=spec,
                zoom=int(r["zoom"]),
                px0=int(r["px0"]),
                py0=int(r["py0"]),
                width=int(r["width"]),
                height=int(r["height"]),
            )
        )
    detectors = tuple((d["id"], parses_model(d["model"])) for d in doc["detectors"])
    return ScanJob(
        job_id=doc["job_id"],
        regions=tuple(regions),
        detectors=detectors,
        params=params,
        unit_tiles=int(doc["unit_tiles"]),
        min_neighbors=int(doc["min_neighbors"]),
        group_iou=float(doc["group_iou"]),
        dedup_iou=float(doc["dedup_iou"]),
    )


def partition(job: ScanJob) -> list[WorkUnit]:
    """Cut the job's regions into tile-aligned, region-clipped work units.

    Deterministic order: region index, then block row, then block column.
    """
    units: list[WorkUnit] = []
    for ri, region in enumerate(job.regions):
        block = job.unit_tiles * region.source.tile_size
        bx0 = region.px0 // block
        bx1 = (region.px0 + region.width - 1) // block
        by0 = region.py0 // block
        by1 = (region.py0 + region.height - 1) // block
        for by in range(by0, by1 + 1):
            for bx in range(bx0, bx1 + 1):
                ux0 = max(region.px0, bx * block)
                uy0 = max(region.py0, by * block)
                ux1 = min(region.px0 + region.width, (bx + 1) * block)
                uy1 = min(region.py0 + region.height, (by + 1) * block)
                units.append(
                    WorkUnit(
                        unit_id=f"r{ri}-y{by}-x{bx}",
                        job_id=job.job_id,
                        region_index=ri,
                        zoom=region.zoom,
                        px0=ux0,
                        py0=uy0,
                        width=ux1 - ux0,
                        height=uy1 - uy0,
                    )
                )
    return units
