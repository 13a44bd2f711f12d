"""Candidate records: stable ids, JSONL serialization, canonical ordering.

A candidate is one deduplicated detection group pinned to a mosaic. Its id is
a content hash of (body, layer, zoom, bbox) so re-scans of identical output
produce identical ids and votes survive re-ingestion.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

__all__ = [
    "CandidateRecord",
    "candidate_id",
    "canonical_key",
    "record_to_doc",
    "record_from_doc",
    "record_to_json",
    "record_from_json",
    "write_candidates",
    "read_candidates",
]


def candidate_id(body: str, layer: str, zoom: int, bbox_px: tuple[int, int, int, int]) -> str:
    px, py, w, h = bbox_px
    text = f"{body}|{layer}|{zoom}|{px}|{py}|{w}|{h}"
    return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


@dataclass(frozen=True)
class CandidateRecord:
    """One georeferenced candidate as written to candidate files."""

    candidate_id: str
    body: str
    layer: str
    lonlat: tuple[float, float]
    zoom: int
    bbox_px: tuple[int, int, int, int]
    consensus: int
    detector_ids: tuple[str, ...]
    neighbor_count: int
    scores: tuple[tuple[str, float], ...]
    job_id: str

    def __post_init__(self):
        if self.candidate_id != candidate_id(self.body, self.layer, self.zoom, self.bbox_px):
            raise ValueError(f"candidate_id does not match content for {self.candidate_id}")
        if self.consensus < 1 or self.consensus != len(self.detector_ids):
            raise ValueError("consensus must equal the number of detector ids")
        if self.bbox_px[2] <= 0 or self.bbox_px[3] <= 0:
            raise ValueError("bbox must have positive size")

    @property
    def score(self) -> float:
        """Best score across detectors; the ranking scalar."""
        return max(s for _, s in self.scores)

    @property
    def score_map(self) -> dict[str, float]:
        return dict(self.scores)


def canonical_key(rec: CandidateRecord):
    """Sort key for candidate files: body, layer, zoom, strongest first."""
    px, py, w, h = rec.bbox_px
    return (rec.body, rec.layer, rec.zoom, -rec.consensus, -rec.score, py, px, w)


def record_to_doc(rec: CandidateRecord) -> dict:
    return {
        "candidate_id": rec.candidate_id,
        "body": rec.body,
        "layer": rec.layer,
        "lonlat": [round(rec.lonlat[0], 7), round(rec.lonlat[1], 7)],
        "zoom": rec.zoom,
        "bbox_px": list(rec.bbox_px),
        "consensus": rec.consensus,
        "detector_ids": list(rec.detector_ids),
        "neighbor_count": rec.neighbor_count,
        "scores": {k: v for k, v in sorted(rec.scores)},
        "job_id": rec.job_id,
    }


def record_from_doc(doc: dict) -> CandidateRecord:
    return CandidateRecord(
        candidate_id=doc["candidate_id"],
        body=doc["body"],
        layer=doc["layer"],
        lonlat=(float(doc["lonlat"][0]), float(doc["lonlat"][1])),
        zoom=int(doc["zoom"]),
        bbox_px=tuple(int(v) for v in doc["bbox_px"]),
        consensus=int(doc["consensus"]),
        detector_ids=tuple(doc["detector_ids"]),
        neighbor_count=int(doc["neighbor_count"]),
        scores=tuple(sorted((k, float(v)) for k, v in doc["scores"].items())),
        job_id=doc["job_id"],
    )


def record_to_json(rec: CandidateRecord) -> str:
    return json.dumps(record_to_doc(rec), separators=(",", ":"))


def record_from_json(line: str) -> CandidateRecord:
    return record_from_doc(json.loads(line))


def write_candidates(path: str | Path, records: Iterable[CandidateRecord]) -> int:
    """Write records as one JSON object per line; returns the count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="ascii") as fh:
        for rec in records:
            fh.write(record_to_json(rec))
            fh.write("\n")
            n += 1
    return n


def read_candidates(path: str | Path) -> list[CandidateRecord]:
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_from_json(line))
    return out
