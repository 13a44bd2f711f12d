"""Work unit execution and the local thread-pool job runner.

Unit execution is pure given (tiles, models): a unit assembles its tile
block plus the job halo, runs the detector ensemble, shifts hits to mosaic
pixel coordinates, and keeps only groups whose center lies inside the unit's
own rectangle. That ownership rule makes per-unit outputs disjoint enough
for the aggregator's overlap dedup to produce identical results for any
worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

from facescan.detector import CandidateGroup, ScanStats, ensemble_scan
from facescan.pipeline.jobs import ScanJob, WorkUnit, partition
from facescan.tiles import FixtureTileServer, RegionRequest, TileFetcher, assemble_region

__all__ = ["WorkResult", "FetcherPool", "execute_unit", "run_local"]

UNIT_ATTEMPTS = 3


@dataclass
class WorkResult:
    """What one executed (or permanently failed) unit reports back."""

    unit_id: str
    groups: tuple[CandidateGroup, ...]
    pixels_scanned: int
    pixels_missing: int
    windows_evaluated: int
    elapsed_s: float
    grid_windows: int = 0
    skipped_low_variance: int = 0
    rejected_after: dict[int, int] = field(default_factory=dict)
    failed: bool = False
    error: str = ""

    def to_doc(self) -> dict:
        return {
            "unit_id": self.unit_id,
            "groups": [
                {
                    "bbox": list(g.bbox),
                    "neighbor_count": g.neighbor_count,
                    "detector_ids": sorted(g.detector_ids),
                    "best_score": {k: v for k, v in g.best_score},
                }
                for g in self.groups
            ],
            "pixels_scanned": self.pixels_scanned,
            "pixels_missing": self.pixels_missing,
            "windows_evaluated": self.windows_evaluated,
            "elapsed_s": self.elapsed_s,
            "grid_windows": self.grid_windows,
            "skipped_low_variance": self.skipped_low_variance,
            "rejected_after": {str(k): v for k, v in self.rejected_after.items()},
            "failed": self.failed,
            "error": self.error,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "WorkResult":
        groups = tuple(
            CandidateGroup(
                bbox=tuple(int(v) for v in g["bbox"]),
                neighbor_count=int(g["neighbor_count"]),
                detector_ids=frozenset(g["detector_ids"]),
                best_score=tuple(sorted((k, float(v)) for k, v in g["best_score"].items())),
            )
            for g in doc["groups"]
        )
        return cls(
            unit_id=doc["unit_id"],
            groups=groups,
            pixels_scanned=int(doc["pixels_scanned"]),
            pixels_missing=int(doc["pixels_missing"]),
            windows_evaluated=int(doc["windows_evaluated"]),
            elapsed_s=float(doc["elapsed_s"]),
            grid_windows=int(doc.get("grid_windows", 0)),
            skipped_low_variance=int(doc.get("skipped_low_variance", 0)),
            rejected_after={int(k): int(v) for k, v in doc.get("rejected_after", {}).items()},
            failed=bool(doc.get("failed", False)),
            error=doc.get("error", ""),
        )


class FetcherPool:
    """One shared TileFetcher per source spec (cache, rate, single-flight)."""

    def __init__(self, cache_dir=None, fixtures: FixtureTileServer | None = None):
        self.cache_dir = cache_dir
        self.fixtures = fixtures
        self._fetchers: dict[tuple, TileFetcher] = {}

    def get(self, spec) -> TileFetcher:
        key = (spec.kind, spec.uri, spec.layer, spec.tile_size)
        fetcher = self._fetchers.get(key)
        if fetcher is None:
            kw = {}
            if self.fixtures is not None:
                kw["fixtures"] = self.fixtures
            fetcher = TileFetcher(spec, cache_dir=self.cache_dir, **kw)
            self._fetchers[key] = fetcher
        return fetcher


def failed_result(unit: WorkUnit, error: str) -> WorkResult:
    """Accounting for a unit that never produced pixels: all area missing."""
    return WorkResult(
        unit_id=unit.unit_id,
        groups=(),
        pixels_scanned=0,
        pixels_missing=unit.area,
        windows_evaluated=0,
        elapsed_s=0.0,
        failed=True,
        error=error,
    )


def execute_unit(job: ScanJob, unit: WorkUnit, fetchers: FetcherPool) -> WorkResult:
    region = job.regions[unit.region_index]
    spec = region.source
    ts = spec.tile_size
    started = time.monotonic()

    req = RegionRequest(
        z=unit.zoom,
        x0=unit.px0 // ts,
        x1=(unit.px0 + unit.width - 1) // ts,
        y0=unit.py0 // ts,
        y1=(unit.py0 + unit.height - 1) // ts,
        halo_px=job.halo_px,
    )
    assembled = assemble_region(spec, req, fetchers.get(spec))

    # a missing tile blanks out only its overlap with the unit's own rect
    missing_px = 0
    for t in assembled.missing:
        ox, oy = t.x * ts, t.y * ts
        iw = min(ox + ts, unit.px0 + unit.width) - max(ox, unit.px0)
        ih = min(oy + ts, unit.py0 + unit.height) - max(oy, unit.py0)
        if iw > 0 and ih > 0:
            missing_px += iw * ih

    stats = ScanStats()
    groups = ensemble_scan(
        assembled.pixels,
        list(job.detectors),
        job.params,
        iou_min=job.group_iou,
        min_neighbors=job.min_neighbors,
        stats=stats,
    )
    ox, oy = int(assembled.origin.px), int(assembled.origin.py)
    owned = []
    for g in groups:
        px, py, w, h = g.bbox
        px, py = px + ox, py + oy
        if unit.contains_center(px + w / 2.0, py + h / 2.0):
            owned.append(
                CandidateGroup(
                    bbox=(px, py, w, h),
                    neighbor_count=g.neighbor_count,
                    detector_ids=g.detector_ids,
                    best_score=g.best_score,
                )
            )
    owned.sort(key=lambda g: (-g.consensus, -g.score, g.bbox[1], g.bbox[0]))
    return WorkResult(
        unit_id=unit.unit_id,
        groups=tuple(owned),
        pixels_scanned=unit.area - missing_px,
        pixels_missing=missing_px,
        windows_evaluated=stats.evaluated,
        elapsed_s=time.monotonic() - started,
        grid_windows=stats.grid_windows,
        skipped_low_variance=stats.skipped_low_variance,
        rejected_after=dict(stats.rejected_after),
    )


def execute_unit_with_retry(job: ScanJob, unit: WorkUnit, fetchers: FetcherPool) -> WorkResult:
    last = ""
    for _ in range(UNIT_ATTEMPTS):
        try:
            return execute_unit(job, unit, fetchers)
        except Exception as exc:  # noqa: BLE001 - unit failures must not sink the job
            last = f"{type(exc).__name__}: {exc}"
    return failed_result(unit, last)


def run_local(job: ScanJob, worker_count: int = 1, cache_dir=None, fixtures=None):
    """Execute every unit on a thread pool and aggregate.

    The report and candidate output are independent of ``worker_count``.
    """
    from facescan.pipeline.report import build_report

    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    units = partition(job)
    fetchers = FetcherPool(cache_dir=cache_dir, fixtures=fixtures)
    if worker_count == 1:
        results = [execute_unit_with_retry(job, u, fetchers) for u in units]
    else:
        with ThreadPoolExecutor(max_workers=worker_count) as pool:
            results = list(pool.map(lambda u: execute_unit_with_retry(job, u, fetchers), units))
    return build_report(job, units, results)
