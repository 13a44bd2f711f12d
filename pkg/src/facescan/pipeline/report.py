"""Result aggregation: overlap dedup, pixel accounting, and the job report."""

from __future__ import annotations

from dataclasses import dataclass, field

from facescan.candidates import (
    CandidateRecord,
    candidate_id,
    canonical_key,
    record_from_doc,
    record_to_doc,
)
from facescan.detector import _components
from facescan.geo import PixelPoint, Projection, ProjectionKind, pixel_to_lonlat
from facescan.pipeline.jobs import JobRegion, ScanJob, WorkUnit
from facescan.pipeline.runner import WorkResult, failed_result

__all__ = ["LayerTotals", "JobReport", "build_report", "dedup_records", "source_projection"]


def source_projection(spec) -> Projection:
    return Projection(ProjectionKind(spec.projection), spec.body)


@dataclass
class LayerTotals:
    """Pixel and window accounting for one (body, layer) pair."""

    pixels_scanned: int = 0
    pixels_missing: int = 0
    windows_evaluated: int = 0
    grid_windows: int = 0
    skipped_low_variance: int = 0
    rejected_after: dict[int, int] = field(default_factory=dict)

    def absorb(self, res: WorkResult) -> None:
        self.pixels_scanned += res.pixels_scanned
        self.pixels_missing += res.pixels_missing
        self.windows_evaluated += res.windows_evaluated
        self.grid_windows += res.grid_windows
        self.skipped_low_variance += res.skipped_low_variance
        for k, v in res.rejected_after.items():
            self.rejected_after[k] = self.rejected_after.get(k, 0) + v

    def to_doc(self) -> dict:
        return {
            "pixels_scanned": self.pixels_scanned,
            "pixels_missing": self.pixels_missing,
            "windows_evaluated": self.windows_evaluated,
            "grid_windows": self.grid_windows,
            "skipped_low_variance": self.skipped_low_variance,
            "rejected_after": {str(k): v for k, v in sorted(self.rejected_after.items())},
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "LayerTotals":
        return cls(
            pixels_scanned=int(doc["pixels_scanned"]),
            pixels_missing=int(doc["pixels_missing"]),
            windows_evaluated=int(doc["windows_evaluated"]),
            grid_windows=int(doc.get("grid_windows", 0)),
            skipped_low_variance=int(doc.get("skipped_low_variance", 0)),
            rejected_after={int(k): int(v) for k, v in doc.get("rejected_after", {}).items()},
        )


@dataclass
class JobReport:
    job_id: str
    status: str
    unit_count: int
    done_units: int
    failed_units: tuple[str, ...]
    totals: dict[str, LayerTotals]
    candidates: tuple[CandidateRecord, ...]
    candidates_by_consensus: dict[int, int]
    elapsed_unit_s: float

    @property
    def pixels_scanned(self) -> int:
        return sum(t.pixels_scanned for t in self.totals.values())

    @property
    def pixels_missing(self) -> int:
        return sum(t.pixels_missing for t in self.totals.values())

    @property
    def pixels_total(self) -> int:
        return self.pixels_scanned + self.pixels_missing

    def to_doc(self) -> dict:
        return {
            "job_id": self.job_id,
            "status": self.status,
            "unit_count": self.unit_count,
            "done_units": self.done_units,
            "failed_units": list(self.failed_units),
            "totals": {k: t.to_doc() for k, t in sorted(self.totals.items())},
            "candidates": [record_to_doc(r) for r in self.candidates],
            "candidates_by_consensus": {str(k): v for k, v in sorted(self.candidates_by_consensus.items())},
            "elapsed_unit_s": self.elapsed_unit_s,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "JobReport":
        return cls(
            job_id=doc["job_id"],
            status=doc["status"],
            unit_count=int(doc["unit_count"]),
            done_units=int(doc["done_units"]),
            failed_units=tuple(doc["failed_units"]),
            totals={k: LayerTotals.from_doc(t) for k, t in doc["totals"].items()},
            candidates=tuple(record_from_doc(r) for r in doc["candidates"]),
            candidates_by_consensus={int(k): int(v) for k, v in doc["candidates_by_consensus"].items()},
            elapsed_unit_s=float(doc["elapsed_unit_s"]),
        )


def _group_to_record(group, region: JobRegion, job_id: str) -> CandidateRecord:
    px, py, w, h = group.bbox
    spec = region.source
    center = PixelPoint(px + w / 2.0, py + h / 2.0, region.zoom, spec.tile_size)
    ll = pixel_to_lonlat(center, source_projection(spec))
    bbox = (int(px), int(py), int(w), int(h))
    return CandidateRecord(
        candidate_id=candidate_id(spec.body.name, spec.layer, region.zoom, bbox),
        body=spec.body.name,
        layer=spec.layer,
        lonlat=(round(ll.lon_deg, 7), round(ll.lat_deg, 7)),
        zoom=region.zoom,
        bbox_px=bbox,
        consensus=group.consensus,
        detector_ids=tuple(sorted(group.detector_ids)),
        neighbor_count=group.neighbor_count,
        scores=tuple(sorted(group.best_score)),
        job_id=job_id,
    )


def dedup_records(records: list[CandidateRecord], dedup_iou: float = 0.6) -> list[CandidateRecord]:
    """Collapse overlapping candidates, the winner per cluster being the one
    with higher consensus, then higher score, then smaller (py, px)."""
    surfaces: dict[tuple, list[CandidateRecord]] = {}
    for rec in records:
        surfaces.setdefault((rec.body, rec.layer, rec.zoom), []).append(rec)
    kept: list[CandidateRecord] = []
    for _, recs in sorted(surfaces.items()):
        recs.sort(key=canonical_key)
        boxes = [r.bbox_px for r in recs]
        for comp in _components(boxes, dedup_iou):
            kept.append(
                min(
                    (recs[i] for i in comp),
                    key=lambda r: (-r.consensus, -r.score, r.bbox_px[1], r.bbox_px[0], r.bbox_px[2]),
                )
            )
    kept.sort(key=canonical_key)
    return kept


def build_report(job: ScanJob, units: list[WorkUnit], results: list[WorkResult]) -> JobReport:
    """Aggregate unit results deterministically (order of arrival is irrelevant)."""
    by_unit = {u.unit_id: u for u in units}
    seen: dict[str, WorkResult] = {}
    for res in results:
        if res.unit_id not in by_unit:
            raise ValueError(f"result for unknown unit {res.unit_id}")
        if res.unit_id in seen:
            raise ValueError(f"duplicate result for unit {res.unit_id}")
        seen[res.unit_id] = res
    ordered = [seen.get(u.unit_id) or failed_result(u, "no result") for u in units]

    totals: dict[str, LayerTotals] = {}
    records: list[CandidateRecord] = []
    failed: list[str] = []
    elapsed = 0.0
    for unit, res in zip(units, ordered):
        region = job.regions[unit.region_index]
        key = f"{region.source.body.name}/{region.source.layer}"
        totals.setdefault(key, LayerTotals()).absorb(res)
        elapsed += res.elapsed_s
        if res.failed:
            failed.append(unit.unit_id)
            continue
        for g in res.groups:
            records.append(_group_to_record(g, region, job.job_id))

    candidates = tuple(dedup_records(records, job.dedup_iou))
    by_consensus: dict[int, int] = {}
    for rec in candidates:
        by_consensus[rec.consensus] = by_consensus.get(rec.consensus, 0) + 1
    return JobReport(
        job_id=job.job_id,
        status="complete",
        unit_count=len(units),
        done_units=len(units) - len(failed),
        failed_units=tuple(failed),
        totals=totals,
        candidates=candidates,
        candidates_by_consensus=by_consensus,
        elapsed_unit_s=elapsed,
    )
