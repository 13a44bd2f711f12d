"""Cascade training: stage construction over bootstrapped hard negatives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from PIL import Image

from facescan.classifier.boosting import WeakClassifier, boost_rounds, stump_predict
from facescan.classifier.cascade import Cascade, CascadeStage, eval_at_origins, eval_patches
from facescan.classifier.features import FeaturePool, bbf_pool, haar_pool
from facescan.classifier.icons import _box_resize
from facescan.imaging import BASE_WINDOW, integral_image, scaled_window, window_stats_grid


@dataclass(frozen=True)
class CascadeTargets:
    d_min: float = 0.995  # per-stage detection on holdout positives
    f_max: float = 0.5  # per-stage false positive rate on stage negatives
    f_overall: float = 1e-6  # stop once bootstrap acceptance falls below this

    def __post_init__(self):
        if not (0.0 < self.d_min <= 1.0 and 0.0 < self.f_max < 1.0 and 0.0 < self.f_overall < 1.0):
            raise ValueError("targets out of range")


@dataclass(frozen=True)
class TrainConfig:
    family: str = "haar"
    pool_size: int = 6000
    pool_seed: int = 7
    max_stages: int = 10
    max_weak_per_stage: int = 40
    stage_negatives: int = 2000
    holdout_frac: float = 0.2
    min_stage_negatives: int = 25
    seed: int = 0


@dataclass
class MiningResult:
    windows: np.ndarray  # (k, W, W) uint8 the cascade still accepts
    found: int  # accepted among evaluated grid windows
    tried: int  # evaluated grid windows
    exhausted: bool  # full sweep finished short of the request

    @property
    def acceptance(self) -> float:
        return self.found / self.tried if self.tried else 1.0


def _basin_variants(frames: np.ndarray) -> np.ndarray:
    """Expand reviewed false-positive frames across the detector's acceptance basin.

    A scan that accepts a pattern accepts it from several nearby origins and
    pyramid rungs, not just the one frame an export captured. Rejecting only
    the exact frame lets boosting key on incidental pixel detail that does not
    transfer back to scan-time feature sums; small zoom-and-shift variants
    force it to learn the pattern itself.
    """
    out = list(frames)
    w = frames.shape[1]
    for frame in frames:
        im = Image.fromarray(frame, mode="L")
        for side, offsets in ((w + 2, (0, 1, 2)), (w + 4, (0, 2, 4)), (w + 8, (0, 4, 8))):
            big = np.asarray(im.resize((side, side), Image.BILINEAR), dtype=np.uint8)
            for oy in offsets:
                for ox in offsets:
                    out.append(big[oy : oy + w, ox : ox + w])
    return np.stack(out)


class NegativeSource:
    """Mines negative windows from face-free imagery, hardest first.

    Scans a fixed multi-scale grid over the pool images and keeps windows the
    current cascade accepts; with no cascade yet, everything is fair game.
    ``extra`` patches (voted-down false positives) are expanded into
    zoom-and-shift variants up front; the variants the current cascade still
    accepts fill a reserved quarter of every batch, so review feedback keeps
    steady pressure on boosting until the pattern is genuinely rejected.
    """

    def __init__(
        self,
        images: list[np.ndarray],
        seed: int = 0,
        scales: tuple[float, ...] = (1.0, 1.5, 2.25, 3.375, 5.0),
        step_factor: float = 3.0,
        min_stddev: float = 4.0,
        window: int = BASE_WINDOW,
        extra: np.ndarray | None = None,
    ):
        if not images:
            raise ValueError("no negative pool images")
        self.images = [np.ascontiguousarray(im, dtype=np.uint8) for im in images]
        self.integrals = [integral_image(im) for im in self.images]
        self.scales = scales
        self.step_factor = step_factor
        self.min_stddev = min_stddev
        self.window = window
        self.extra = (
            None
            if extra is None or len(extra) == 0
            else _basin_variants(np.asarray(extra, dtype=np.uint8))
        )
        self.rng = np.random.default_rng(seed)

    def _grids(self):
        for img, ii in zip(self.images, self.integrals):
            h, w = img.shape
            for scale in self.scales:
                win = scaled_window(self.window, scale)
                if win > min(h, w):
                    continue
                step = max(2, round(self.step_factor * scale))
                gx = np.arange(0, w - win + 1, step)
                gy = np.arange(0, h - win + 1, step)
                xs, ys = (a.ravel() for a in np.meshgrid(gx, gy))
                yield img, ii, scale, win, xs.astype(np.int64), ys.astype(np.int64)

    def sample(self, cascade: Cascade | None, count: int) -> MiningResult:
        """Mine up to ``count`` accepted windows, reserving a share for extras."""
        extras: list[np.ndarray] = []
        if self.extra is not None:
            if cascade is None:
                keep = self.extra
            else:
                acc, _, _ = eval_patches(cascade, self.extra)
                keep = self.extra[acc]
            if len(keep):
                target = max(1, count // 4)
                if len(keep) > target:
                    keep = keep[np.linspace(0, len(keep) - 1, target).astype(int)]
                extras = [keep[i % len(keep)] for i in range(target)]
        harvest_cap = count * 2
        mined: list[np.ndarray] = []
        tried = found = 0
        for img, ii, scale, win, xs, ys in self._grids():
            _, stds = window_stats_grid(ii, xs, ys, win)
            live = stds >= self.min_stddev
            xs, ys = xs[live], ys[live]
            tried += len(xs)
            if cascade is None:
                acc_idx = np.arange(len(xs))
            else:
                accepted, _, _ = eval_at_origins(cascade, ii, xs, ys, scale)
                acc_idx = np.flatnonzero(accepted)
            found += len(acc_idx)
            room = harvest_cap - len(mined)
            if room > 0 and len(acc_idx) > 0:
                take = acc_idx
                if len(take) > room:
                    # spread across the grid instead of clustering at the top
                    take = take[np.linspace(0, len(take) - 1, room).astype(int)]
                for i in take:
                    x, y = int(xs[i]), int(ys[i])
                    mined.append(_box_resize(img[y : y + win, x : x + win], self.window))
        quota = count - len(extras)
        if len(mined) > quota:
            pick = np.sort(self.rng.choice(len(mined), size=quota, replace=False))
            mined = [mined[i] for i in pick]
        exhausted = len(extras) + len(mined) < count
        crops = extras + mined
        windows = (
            np.stack(crops) if crops else np.empty((0, self.window, self.window), dtype=np.uint8)
        )
        return MiningResult(windows, found, tried, exhausted)

    def measure(self, cascade: Cascade) -> tuple[int, int]:
        """(accepted, evaluated) for the cascade over the full grid sweep."""
        tried = found = 0
        for _, ii, scale, win, xs, ys in self._grids():
            _, stds = window_stats_grid(ii, xs, ys, win)
            live = stds >= self.min_stddev
            xs, ys = xs[live], ys[live]
            tried += len(xs)
            accepted, _, _ = eval_at_origins(cascade, ii, xs, ys, scale)
            found += int(accepted.sum())
        return found, tried


@dataclass
class StageReport:
    n_weak: int
    threshold: float
    detection_holdout: float
    fp_stage: float
    mined: int
    mining_acceptance: float


@dataclass
class TrainReport:
    stages: list[StageReport] = field(default_factory=list)
    fp_estimate: float = 1.0
    reached_target: bool = False
    notes: list[str] = field(default_factory=list)


def train_cascade(
    positives: np.ndarray,
    source: NegativeSource,
    targets: CascadeTargets = CascadeTargets(),
    config: TrainConfig = TrainConfig(),
    pool: FeaturePool | None = None,
    meta: dict[str, str] | None = None,
) -> tuple[Cascade, TrainReport]:
    """Grow stages until the bootstrap false-positive estimate hits target.

    Positives are (N, W, W) uint8 windows; a seeded shuffle splits off the
    holdout used to calibrate stage thresholds at d_min. Raises nothing for
    unreachable targets: the report carries achieved rates and notes.
    """
    if positives.ndim != 3 or positives.shape[1] != positives.shape[2]:
        raise ValueError("positives must be (N, W, W)")
    window = positives.shape[1]
    if pool is None:
        if config.family == "haar":
            pool = FeaturePool(haar_pool(config.pool_size, window), window)
        else:
            pool = FeaturePool(bbf_pool(config.pool_size, config.pool_seed, window), window)

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(positives))
    n_hold = max(1, int(round(config.holdout_frac * len(positives))))
    if n_hold >= len(positives):
        raise ValueError("not enough positives to split a holdout")
    hold = positives[perm[:n_hold]]
    train_pos = positives[perm[n_hold:]]

    m_pos = pool.values(train_pos)
    m_hold = pool.values(hold)
    n_pos = len(train_pos)

    report = TrainReport()
    stages: list[CascadeStage] = []
    cascade = None
    while len(stages) < config.max_stages:
        mined = source.sample(cascade, config.stage_negatives)
        if cascade is not None:
            report.fp_estimate = mined.acceptance
            if report.fp_estimate <= targets.f_overall:
                report.reached_target = True
                break
        if len(mined.windows) < config.min_stage_negatives:
            report.notes.append(
                f"negative pool exhausted after {len(stages)} stages "
                f"({len(mined.windows)} windows mined)"
            )
            break

        m_neg = pool.values(mined.windows)
        matrix = np.vstack([m_pos, m_neg])
        labels = np.concatenate([np.ones(n_pos), -np.ones(len(m_neg))])
        order = np.argsort(matrix, axis=0, kind="stable").astype(np.int32)

        weak: list[WeakClassifier] = []
        hold_scores = np.zeros(len(hold))
        thr = 0.0
        d_hold = f_stage = 1.0
        for pick, margins, _ in boost_rounds(matrix, labels, order=order):
            weak.append(
                WeakClassifier(
                    pool.features[pick.feature_index], pick.threshold, pick.polarity, pick.alpha
                )
            )
            hold_scores = hold_scores + pick.alpha * stump_predict(
                m_hold[:, pick.feature_index].astype(np.float64), pick.threshold, pick.polarity
            )
            # largest threshold keeping at least d_min of the holdout
            k = int(np.ceil(targets.d_min * len(hold)))
            thr = float(np.sort(hold_scores)[::-1][k - 1])
            d_hold = float(np.mean(hold_scores >= thr))
            f_stage = float(np.mean(margins[n_pos:] >= thr))
            if f_stage <= targets.f_max or len(weak) >= config.max_weak_per_stage:
                break
        if not weak:
            report.notes.append("boosting found no stump better than chance; stopping")
            break

        stages.append(CascadeStage(tuple(weak), thr))
        cascade = Cascade(window, pool.family, tuple(stages), _meta_pairs(meta))
        report.stages.append(
            StageReport(len(weak), thr, d_hold, f_stage, len(mined.windows), mined.acceptance)
        )
        if mined.exhausted and len(stages) > 1:
            report.notes.append("mining fell short of the stage budget; later stages may stall")

    if cascade is None:
        raise ValueError("no stage could be trained")
    if not report.reached_target:
        found, tried = source.measure(cascade)
        report.fp_estimate = found / tried if tried else 0.0
        report.reached_target = report.fp_estimate <= targets.f_overall
        if not report.reached_target:
            report.notes.append(
                f"stopped at fp estimate {report.fp_estimate:.2e} > target {targets.f_overall:.0e}"
            )
    return cascade, report


def _meta_pairs(meta: dict[str, str] | None) -> tuple[tuple[str, str], ...]:
    if not meta:
        return ()
    return tuple((str(k), str(v)) for k, v in meta.items())
