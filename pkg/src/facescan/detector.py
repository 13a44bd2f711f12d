"""Multi-scale sliding-window scanning, detection grouping, ensemble fusion.

Windows slide on a per-scale grid; the cascade is scaled to the window
rather than resampling the image. Raw detections are grouped into connected
components under an IoU threshold (per detector first, then across
detectors), with the component size serving as the confidence signal and
the distinct-detector count as consensus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from facescan.classifier import Cascade, eval_at_origins
from facescan.imaging import BASE_WINDOW, integral_image, scaled_window, window_stats_grid

Bbox = tuple[int, int, int, int]  # (px, py, w, h)


@dataclass(frozen=True)
class ScanParams:
    scale_start: float = 1.0
    scale_factor: float = 1.25
    step_base: float = 2.0  # step = max(1, round(step_base * scale))
    min_window: int | None = None  # defaults to the cascade base window
    max_window: int | None = None  # defaults to min(image dims)
    skip_low_variance: bool = True
    min_stddev: float = 4.0

    def __post_init__(self):
        if self.scale_factor <= 1.0:
            raise ValueError("scale_factor must be > 1")
        if self.scale_start <= 0.0 or self.step_base <= 0.0:
            raise ValueError("scale_start and step_base must be positive")


@dataclass(frozen=True)
class Detection:
    bbox: Bbox
    score: float
    detector_id: str
    scale: float

    def __post_init__(self):
        if self.bbox[2] != self.bbox[3]:
            raise ValueError("scan windows are square")


@dataclass(frozen=True)
class CandidateGroup:
    bbox: Bbox
    neighbor_count: int
    detector_ids: frozenset[str]
    best_score: tuple[tuple[str, float], ...]  # per-detector max, sorted by id

    @property
    def consensus(self) -> int:
        return len(self.detector_ids)

    @property
    def score(self) -> float:
        return max(s for _, s in self.best_score)


@dataclass
class ScanStats:
    grid_windows: int = 0
    evaluated: int = 0
    skipped_low_variance: int = 0
    accepted: int = 0
    # index k: rejected windows that had passed exactly k stages
    rejected_after: dict[int, int] = field(default_factory=dict)

    def merge(self, other: "ScanStats") -> None:
        self.grid_windows += other.grid_windows
        self.evaluated += other.evaluated
        self.skipped_low_variance += other.skipped_low_variance
        self.accepted += other.accepted
        for k, v in other.rejected_after.items():
            self.rejected_after[k] = self.rejected_after.get(k, 0) + v

    def rejected_within(self, stages: int) -> int:
        return sum(v for k, v in self.rejected_after.items() if k < stages)


def iou(a: Bbox, b: Bbox) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def scan_image(
    gray: np.ndarray,
    cascade: Cascade,
    params: ScanParams = ScanParams(),
    detector_id: str = "default",
    stats: ScanStats | None = None,
) -> list[Detection]:
    """All accepted windows, ordered by (scale, py, px).

    ``stats``, when given, accumulates grid/evaluation/rejection counters for
    efficiency reporting.
    """
    if gray.ndim != 2:
        raise ValueError("scan_image expects a grayscale image")
    h, w = gray.shape
    base = cascade.base_window
    if min(h, w) < base:
        return []
    ii = integral_image(gray)

    lo = params.min_window or base
    hi = min(h, w, params.max_window or min(h, w))
    out: list[Detection] = []
    scale = params.scale_start
    while True:
        win = scaled_window(base, scale)
        if win > hi:
            break
        if win >= lo:
            step = max(1, round(params.step_base * scale))
            gx = np.arange(0, w - win + 1, step, dtype=np.int64)
            gy = np.arange(0, h - win + 1, step, dtype=np.int64)
            xs, ys = (a.ravel() for a in np.meshgrid(gx, gy))
            n_grid = len(xs)
            if params.skip_low_variance:
                _, stds = window_stats_grid(ii, xs, ys, win)
                live = stds >= params.min_stddev
                xs, ys = xs[live], ys[live]
            accepted, scores, passed = eval_at_origins(cascade, ii, xs, ys, scale)
            if stats is not None:
                stats.grid_windows += n_grid
                stats.evaluated += len(xs)
                stats.skipped_low_variance += n_grid - len(xs)
                stats.accepted += int(accepted.sum())
                for k in np.flatnonzero(~accepted):
                    key = int(passed[k])
                    stats.rejected_after[key] = stats.rejected_after.get(key, 0) + 1
            # meshgrid order is y-major, so acceptance order is already (py, px)
            for k in np.flatnonzero(accepted):
                out.append(
                    Detection((int(xs[k]), int(ys[k]), win, win), float(scores[k]), detector_id, scale)
                )
        scale *= params.scale_factor
    return out


def _components(boxes: list[Bbox], iou_min: float) -> list[list[int]]:
    """Connected components of the IoU >= iou_min graph, smallest index first."""
    n = len(boxes)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if iou(boxes[i], boxes[j]) >= iou_min:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)
    return [comps[r] for r in sorted(comps)]


def group_detections(
    dets: list[Detection], iou_min: float = 0.3, min_neighbors: int = 2
) -> list[CandidateGroup]:
    """Merge raw detections into candidate groups.

    Components form within each detector's detections first; the resulting
    per-detector clusters then merge across detectors under the same IoU
    threshold. Groups smaller than min_neighbors are dropped. Output is
    ordered by (py, px).
    """
    clusters = []  # (mean bbox, member detections)
    for det_id in sorted({d.detector_id for d in dets}):
        mine = [d for d in dets if d.detector_id == det_id]
        for comp in _components([d.bbox for d in mine], iou_min):
            members = [mine[i] for i in comp]
            clusters.append((_mean_box([m.bbox for m in members]), members))

    groups = []
    for comp in _components([c[0] for c in clusters], iou_min):
        members = [d for i in comp for d in clusters[i][1]]
        if len(members) < min_neighbors:
            continue
        by_det: dict[str, float] = {}
        for d in members:
            if d.detector_id not in by_det or d.score > by_det[d.detector_id]:
                by_det[d.detector_id] = d.score
        groups.append(
            CandidateGroup(
                _mean_box([m.bbox for m in members]),
                len(members),
                frozenset(by_det),
                tuple(sorted(by_det.items())),
            )
        )
    groups.sort(key=lambda g: (g.bbox[1], g.bbox[0]))
    return groups


def _mean_box(boxes: list[Bbox]) -> Bbox:
    arr = np.asarray(boxes, dtype=np.float64)
    m = arr.mean(axis=0)
    return (int(round(m[0])), int(round(m[1])), int(round(m[2])), int(round(m[3])))


def ensemble_scan(
    gray: np.ndarray,
    detectors: list[tuple[str, Cascade]],
    params: ScanParams = ScanParams(),
    iou_min: float = 0.3,
    min_neighbors: int = 2,
    stats: ScanStats | None = None,
) -> list[CandidateGroup]:
    """Scan with every registered detector and fuse the results.

    Output sorts by (consensus desc, best score desc), then (py, px) for
    stability.
    """
    if not detectors:
        raise ValueError("ensemble needs at least one detector")
    dets: list[Detection] = []
    for det_id, cascade in detectors:
        dets.extend(scan_image(gray, cascade, params, det_id, stats))
    groups = group_detections(dets, iou_min, min_neighbors)
    groups.sort(key=lambda g: (-g.consensus, -g.score, g.bbox[1], g.bbox[0]))
    return groups
