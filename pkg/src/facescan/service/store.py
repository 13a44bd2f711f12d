"""File-backed candidate store with voting and hard-negative export.

Persistence is two plain files plus a thumbnail directory under one root:

    candidates.jsonl   snapshot store, one candidate per line, append-only
    votes.log          append-only vote events, one JSON object per line
    thumbs/{id}.png    grayscale crop around each candidate bbox

Re-opening a store replays both files, so tallies are always reconstructible
from the vote log alone. A candidate is listable only once its thumbnail is
on disk; ingest writes the thumbnail first and the snapshot line second.
"""

from __future__ import annotations

import io
import json
import math
import os
import threading
import zipfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from PIL import Image

from facescan.candidates import CandidateRecord, read_candidates, record_from_doc, record_to_doc
from facescan.geo import mosaic_size_px
from facescan.imaging import BASE_WINDOW
from facescan.tiles import RegionRequest, TileFetcher, TileSourceSpec, assemble_region

__all__ = [
    "CandidateStore",
    "HardNegativeExport",
    "StoredCandidate",
    "Tally",
    "load_negative_patches",
    "wilson_lower_bound",
]

VERDICTS = ("face", "not_face")
THUMB_MARGIN = 0.5  # crop margin per side, as a fraction of the bbox size


def wilson_lower_bound(positive: int, total: int, z: float = 1.96) -> float:
    """Lower bound of the Wilson score interval; 0 when there are no votes."""
    if total == 0:
        return 0.0
    if not (0 <= positive <= total):
        raise ValueError("positive must be within [0, total]")
    p = positive / total
    z2 = z * z
    center = p + z2 / (2 * total)
    radius = z * math.sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total))
    return max(0.0, (center - radius) / (1.0 + z2 / total))


@dataclass(frozen=True)
class Tally:
    candidate_id: str
    face_votes: int
    not_face_votes: int
    wilson_lower_bound: float

    @property
    def total(self) -> int:
        return self.face_votes + self.not_face_votes

    def to_doc(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "face_votes": self.face_votes,
            "not_face_votes": self.not_face_votes,
            "wilson_lower_bound": round(self.wilson_lower_bound, 6),
        }


@dataclass(frozen=True)
class StoredCandidate:
    """A candidate plus its ingest bookkeeping."""

    record: CandidateRecord
    created_at: str
    seq: int
    thumb_origin: tuple[int, int]  # mosaic pixel of the thumbnail's top-left

    @property
    def candidate_id(self) -> str:
        return self.record.candidate_id

    def bbox_in_thumb(self) -> tuple[int, int, int, int]:
        px, py, w, h = self.record.bbox_px
        ox, oy = self.thumb_origin
        return (px - ox, py - oy, w, h)


def _png_bytes(gray: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(gray, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _gray_from_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def _thumb_rect(record: CandidateRecord, tile_size: int) -> tuple[int, int, int, int]:
    """Crop rect (x0, y0, x1, y1) = bbox padded by THUMB_MARGIN, clamped."""
    px, py, w, h = record.bbox_px
    mx, my = round(w * THUMB_MARGIN), round(h * THUMB_MARGIN)
    size = mosaic_size_px(record.zoom, tile_size)
    x0 = max(0, px - mx)
    y0 = max(0, py - my)
    x1 = min(size, px + w + mx)
    y1 = min(size, py + h + my)
    return x0, y0, x1, y1


@dataclass(frozen=True)
class HardNegativeExport:
    """Rescaled negative patches plus their provenance manifest."""

    manifest: dict
    patches: tuple[tuple[str, bytes], ...]  # (relative file name, PNG bytes)

    def write_dir(self, path: str | Path) -> Path:
        root = Path(path)
        (root / "patches").mkdir(parents=True, exist_ok=True)
        for name, data in self.patches:
            (root / name).write_bytes(data)
        with open(root / "manifest.json", "w") as fh:
            json.dump(self.manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return root

    def to_zip_bytes(self) -> bytes:
        def entry(name: str) -> zipfile.ZipInfo:
            # fixed timestamp: identical store state must zip to identical bytes
            return zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))

        buf = io.BytesIO()
        with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr(entry("manifest.json"), json.dumps(self.manifest, indent=1, sort_keys=True))
            for name, data in self.patches:
                zf.writestr(entry(name), data)
        return buf.getvalue()

    def arrays(self) -> np.ndarray:
        """Decode every patch into one (n, window, window) uint8 stack."""
        w = self.manifest["window"]
        if not self.patches:
            return np.zeros((0, w, w), dtype=np.uint8)
        return np.stack([_gray_from_png(data) for _, data in self.patches])


def load_negative_patches(path: str | Path) -> np.ndarray:
    """Read a written export back as a patch stack, in manifest order."""
    root = Path(path)
    with open(root / "manifest.json") as fh:
        manifest = json.load(fh)
    w = manifest["window"]
    if not manifest["patches"]:
        return np.zeros((0, w, w), dtype=np.uint8)
    return np.stack(
        [_gray_from_png((root / entry["file"]).read_bytes()) for entry in manifest["patches"]]
    )


class CandidateStore:
    """Candidates, thumbnails, and votes under one directory."""

    def __init__(self, root: str | Path, clock: Callable[[], float] | None = None):
        self.root = Path(root)
        self.thumbs = self.root / "thumbs"
        self.thumbs.mkdir(parents=True, exist_ok=True)
        self._candidates_path = self.root / "candidates.jsonl"
        self._votes_path = self.root / "votes.log"
        self._clock = clock or (lambda: datetime.now(timezone.utc).timestamp())
        self._lock = threading.RLock()
        self._items: dict[str, StoredCandidate] = {}
        # votes survive candidate re-ingestion: keep them even for ids that
        # are not currently listable
        self._votes: dict[str, dict[str, tuple[str, str]]] = {}
        self._load()

    # -- persistence ---------------------------------------------------------

    def _load(self) -> None:
        if self._candidates_path.exists():
            with open(self._candidates_path) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    doc = json.loads(line)
                    cid = doc["candidate_id"]
                    if cid in self._items:
                        continue  # first line wins; later lines are repairs
                    if not self._thumb_path(cid).exists():
                        continue  # not listable without its thumbnail
                    self._items[cid] = StoredCandidate(
                        record=record_from_doc(doc),
                        created_at=doc["created_at"],
                        seq=len(self._items),
                        thumb_origin=tuple(doc["thumb_origin"]),
                    )
        if self._votes_path.exists():
            with open(self._votes_path) as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        doc = json.loads(line)
                        self._apply_vote(
                            doc["candidate_id"], doc["verdict"], doc["voter_token"], doc["voted_at"]
                        )

    def _thumb_path(self, cid: str) -> Path:
        return self.thumbs / f"{cid}.png"

    def _now_iso(self) -> str:
        return datetime.fromtimestamp(self._clock(), timezone.utc).isoformat()

    # -- ingest ----------------------------------------------------------------

    def ingest(
        self,
        records: Iterable[CandidateRecord],
        sources: TileSourceSpec | Sequence[TileSourceSpec],
        fetchers: dict | None = None,
        cache_dir: str | None = None,
        fixtures: dict | None = None,
    ) -> int:
        """Store new candidates with thumbnails; returns how many were new.

        ``sources`` supplies the imagery; each record is matched to a source
        by (body, layer). Already-present candidate_ids are skipped, which
        makes ingestion idempotent.
        """
        if isinstance(sources, TileSourceSpec):
            sources = [sources]
        by_key = {(s.body.name, s.layer): s for s in sources}
        fetchers = fetchers if fetchers is not None else {}
        new = 0
        for rec in records:
            key = (rec.body, rec.layer)
            if key not in by_key:
                raise ValueError(f"no tile source for body/layer {key}")
            with self._lock:
                if rec.candidate_id in self._items:
                    continue
            spec = by_key[key]
            if key not in fetchers:
                fetchers[key] = TileFetcher(spec, cache_dir=cache_dir, fixtures=fixtures)
            thumb, origin = self._render_thumb(rec, spec, fetchers[key])
            with self._lock:
                if rec.candidate_id in self._items:  # lost a race, not an error
                    continue
                self._write_candidate(rec, thumb, origin)
                new += 1
        return new

    def ingest_file(self, path: str | Path, sources, **kw) -> int:
        return self.ingest(read_candidates(path), sources, **kw)

    def _render_thumb(
        self, rec: CandidateRecord, spec: TileSourceSpec, fetcher: TileFetcher
    ) -> tuple[np.ndarray, tuple[int, int]]:
        ts = spec.tile_size
        x0, y0, x1, y1 = _thumb_rect(rec, ts)
        req = RegionRequest(rec.zoom, x0 // ts, (x1 - 1) // ts, y0 // ts, (y1 - 1) // ts)
        region = assemble_region(spec, req, fetcher)
        ox, oy = region.origin.px, region.origin.py
        return region.pixels[y0 - oy : y1 - oy, x0 - ox : x1 - ox], (x0, y0)

    def _write_candidate(self, rec: CandidateRecord, thumb: np.ndarray, origin) -> None:
        # thumbnail first: a candidate may never be listable without one
        tmp = self._thumb_path(rec.candidate_id).with_suffix(f".{os.getpid()}.tmp")
        tmp.write_bytes(_png_bytes(thumb))
        os.replace(tmp, self._thumb_path(rec.candidate_id))
        stored = StoredCandidate(
            record=rec,
            created_at=self._now_iso(),
            seq=len(self._items),
            thumb_origin=(int(origin[0]), int(origin[1])),
        )
        doc = record_to_doc(rec)
        doc["created_at"] = stored.created_at
        doc["thumb_origin"] = list(stored.thumb_origin)
        with open(self._candidates_path, "a") as fh:
            fh.write(json.dumps(doc, separators=(",", ":")) + "\n")
        self._items[rec.candidate_id] = stored

    # -- votes -----------------------------------------------------------------

    def _apply_vote(self, cid: str, verdict: str, voter: str, voted_at: str) -> None:
        self._votes.setdefault(cid, {})[voter] = (verdict, voted_at)

    def cast_vote(self, candidate_id: str, verdict: str, voter_token: str) -> Tally:
        """Upsert one voter's verdict and return the fresh tally."""
        if verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}")
        if not voter_token or not isinstance(voter_token, str) or len(voter_token) > 200:
            raise ValueError("voter_token must be a non-empty string (at most 200 chars)")
        with self._lock:
            if candidate_id not in self._items:
                raise KeyError(candidate_id)
            voted_at = self._now_iso()
            event = {
                "candidate_id": candidate_id,
                "verdict": verdict,
                "voter_token": voter_token,
                "voted_at": voted_at,
            }
            with open(self._votes_path, "a") as fh:
                fh.write(json.dumps(event, separators=(",", ":")) + "\n")
            self._apply_vote(candidate_id, verdict, voter_token, voted_at)
            return self.tally(candidate_id)

    def tally(self, candidate_id: str) -> Tally:
        with self._lock:
            if candidate_id not in self._items:
                raise KeyError(candidate_id)
            votes = self._votes.get(candidate_id, {})
            face = sum(1 for verdict, _ in votes.values() if verdict == "face")
            total = len(votes)
        return Tally(candidate_id, face, total - face, wilson_lower_bound(face, total))

    def vote_of(self, candidate_id: str, voter_token: str) -> str | None:
        with self._lock:
            got = self._votes.get(candidate_id, {}).get(voter_token)
            return got[0] if got else None

    # -- queries -----------------------------------------------------------------

    def get(self, candidate_id: str) -> StoredCandidate:
        with self._lock:
            return self._items[candidate_id]

    def thumbnail_png(self, candidate_id: str) -> bytes:
        with self._lock:
            if candidate_id not in self._items:
                raise KeyError(candidate_id)
        return self._thumb_path(candidate_id).read_bytes()

    def list_candidates(
        self,
        body: str | None = None,
        layer: str | None = None,
        min_consensus: int | None = None,
        sort: str = "consensus",
        page: int = 1,
        page_size: int = 50,
    ) -> tuple[list[tuple[StoredCandidate, Tally]], int]:
        """One page of (candidate, tally) plus the filtered total.

        Every sort key ends with a unique field, so pagination is stable: the
        pages of a fixed query partition the filtered set.
        """
        if page < 1 or page_size < 1:
            raise ValueError("page and page_size are 1-based")
        with self._lock:
            rows = [
                (sc, self.tally(sc.candidate_id))
                for sc in self._items.values()
                if (body is None or sc.record.body == body)
                and (layer is None or sc.record.layer == layer)
                and (min_consensus is None or sc.record.consensus >= min_consensus)
            ]
        if sort == "consensus":
            rows.sort(
                key=lambda it: (
                    -it[0].record.consensus,
                    -it[0].record.score,
                    it[0].candidate_id,
                )
            )
        elif sort == "votes":
            rows.sort(
                key=lambda it: (-it[1].wilson_lower_bound, -it[1].total, it[0].candidate_id)
            )
        elif sort == "newest":
            rows.sort(key=lambda it: -it[0].seq)
        else:
            raise ValueError("sort must be one of: consensus, votes, newest")
        start = (page - 1) * page_size
        return rows[start : start + page_size], len(rows)

    def stats(self) -> dict:
        with self._lock:
            voters = {v for votes in self._votes.values() for v in votes}
            active = {cid: votes for cid, votes in self._votes.items() if cid in self._items}
            by_body: dict[str, int] = {}
            for sc in self._items.values():
                by_body[sc.record.body] = by_body.get(sc.record.body, 0) + 1
            return {
                "candidates": len(self._items),
                "votes": sum(len(v) for v in active.values()),
                "voters": len(voters),
                "reviewed": sum(1 for v in active.values() if v),
                "by_body": dict(sorted(by_body.items())),
            }

    # -- retraining export ---------------------------------------------------------

    def export_hard_negatives(
        self, min_not_face: int = 3, max_face: int = 0, window: int = BASE_WINDOW
    ) -> HardNegativeExport:
        """Voted-down candidates as base-window grayscale training patches.

        Patches are area-averaged down to the window, the same resampling the
        trainer's miners apply to their crops. Ordered by candidate_id, so the
        same store state always exports the same archive.
        """
        if min_not_face < 1:
            raise ValueError("min_not_face must be >= 1")
        with self._lock:
            chosen = []
            for cid in sorted(self._items):
                t = self.tally(cid)
                if t.not_face_votes >= min_not_face and t.face_votes <= max_face:
                    chosen.append((self._items[cid], t))
        patches: list[tuple[str, bytes]] = []
        entries = []
        for sc, t in chosen:
            thumb = _gray_from_png(self._thumb_path(sc.candidate_id).read_bytes())
            bx, by, bw, bh = sc.bbox_in_thumb()
            crop = Image.fromarray(thumb[by : by + bh, bx : bx + bw], mode="L")
            patch = np.asarray(crop.resize((window, window), Image.Resampling.BOX), dtype=np.uint8)
            name = f"patches/{sc.candidate_id}.png"
            patches.append((name, _png_bytes(patch)))
            entries.append(
                {
                    "candidate_id": sc.candidate_id,
                    "file": name,
                    "body": sc.record.body,
                    "layer": sc.record.layer,
                    "zoom": sc.record.zoom,
                    "bbox_px": list(sc.record.bbox_px),
                    "face_votes": t.face_votes,
                    "not_face_votes": t.not_face_votes,
                }
            )
        manifest = {
            "format": "negative-patches-v1",
            "window": window,
            "min_not_face": min_not_face,
            "max_face": max_face,
            "count": len(entries),
            "patches": entries,
        }
        return HardNegativeExport(manifest=manifest, patches=tuple(patches))
