"""TOML configuration for the train and scan CLIs."""

from __future__ import annotations

from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from facescan.classifier import (
    CascadeTargets,
    IconParams,
    NegativeSource,
    TrainConfig,
    generate_face_icons,
    load_model,
    stylized_params,
    train_cascade,
)
from facescan.detector import ScanParams
from facescan.geo import BODIES, Body
from facescan.pipeline.jobs import JobRegion, ScanJob
from facescan.tiles import DEFAULT_FIXTURES, SourceKind, TileSourceSpec

__all__ = ["load_job", "load_train", "train_from_config"]


def _read_toml(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _body(doc: dict) -> Body:
    name = doc.get("body", "mars")
    if name in BODIES:
        return BODIES[name]
    radius = doc.get("body_radius_m")
    if radius is None:
        raise ValueError(f"unknown body {name!r}: give body_radius_m")
    return Body(name, float(radius))


def _source(doc: dict, base: Path) -> TileSourceSpec:
    kind = SourceKind(doc.get("kind", "fixture"))
    uri = doc["uri"]
    if kind is SourceKind.LOCAL_DIR and not Path(uri).is_absolute():
        uri = str(base / uri)
    return TileSourceSpec(
        kind=kind,
        uri=uri,
        layer=doc.get("layer", doc["uri"]),
        body=_body(doc),
        projection=doc.get("projection", "equirectangular"),
        tile_size=int(doc.get("tile_size", 256)),
        max_zoom=int(doc["max_zoom"]) if "max_zoom" in doc else None,
    )


def _params(doc: dict) -> ScanParams:
    return ScanParams(
        scale_start=float(doc.get("scale_start", 1.0)),
        scale_factor=float(doc.get("scale_factor", 1.25)),
        step_base=float(doc.get("step_base", 2.0)),
        min_window=int(doc["min_window"]) if "min_window" in doc else None,
        max_window=int(doc["max_window"]) if "max_window" in doc else None,
        skip_low_variance=bool(doc.get("skip_low_variance", True)),
        min_stddev=float(doc.get("min_stddev", 4.0)),
    )


def load_job(path: str | Path) -> tuple[ScanJob, dict]:
    """Build a ScanJob from a TOML file; returns (job, extra options).

    Model paths resolve relative to the config file. Extra options currently
    hold ``cache_dir`` when configured.
    """
    path = Path(path)
    doc = _read_toml(path)
    base = path.parent
    detectors = []
    for d in doc.get("detectors", []):
        model_path = Path(d["model"])
        if not model_path.is_absolute():
            model_path = base / model_path
        detectors.append((d["id"], load_model(model_path)))
    regions = []
    for r in doc.get("regions", []):
        regions.append(
            JobRegion(
                source=_source(r, base),
                zoom=int(r["zoom"]),
                px0=int(r["px0"]),
                py0=int(r["py0"]),
                width=int(r["width"]),
                height=int(r["height"]),
            )
        )
    job = ScanJob(
        job_id=doc["job_id"],
        regions=tuple(regions),
        detectors=tuple(detectors),
        params=_params(doc.get("params", {})),
        unit_tiles=int(doc.get("unit_tiles", 8)),
        min_neighbors=int(doc.get("min_neighbors", 2)),
        group_iou=float(doc.get("group_iou", 0.3)),
        dedup_iou=float(doc.get("dedup_iou", 0.6)),
    )
    options = {}
    if "cache_dir" in doc:
        cache = Path(doc["cache_dir"])
        options["cache_dir"] = cache if cache.is_absolute() else base / cache
    return job, options


def load_train(path: str | Path) -> dict:
    doc = _read_toml(path)
    doc.setdefault("icons", {})
    doc.setdefault("negatives", {})
    doc.setdefault("train", {})
    doc.setdefault("targets", {})
    return doc


def train_from_config(doc: dict, fixtures=None):
    """Generate icons, render fixture negatives, and train a cascade."""
    fixtures = fixtures if fixtures is not None else DEFAULT_FIXTURES
    icons_doc = doc["icons"]
    window = int(icons_doc.get("window", 24))
    seed = int(icons_doc.get("seed", 1))
    params = stylized_params(seed) if icons_doc.get("stylized", False) else IconParams(seed=seed)
    positives = generate_face_icons(int(icons_doc.get("count", 2000)), params, window=window)

    neg_doc = doc["negatives"]
    layer = neg_doc.get("layer", "terrain")
    zoom = int(neg_doc.get("zoom", 3))
    tiles = neg_doc.get("tiles")
    if tiles is None:
        count = int(neg_doc.get("count", 8))
        side = 1 << zoom
        tiles = [[i % side, i // side] for i in range(count)]
    images = [fixtures.render(layer, zoom, int(x), int(y)) for x, y in tiles]
    extra = None
    if "extra_dir" in neg_doc:
        from facescan.service import load_negative_patches

        extra = load_negative_patches(neg_doc["extra_dir"])
    source = NegativeSource(images, seed=int(neg_doc.get("seed", 17)), window=window, extra=extra)

    train_doc = doc["train"]
    config = TrainConfig(
        family=train_doc.get("family", "haar"),
        pool_size=int(train_doc.get("pool_size", 6000)),
        pool_seed=int(train_doc.get("pool_seed", 7)),
        max_stages=int(train_doc.get("max_stages", 10)),
        max_weak_per_stage=int(train_doc.get("max_weak_per_stage", 40)),
        stage_negatives=int(train_doc.get("stage_negatives", 2000)),
        holdout_frac=float(train_doc.get("holdout_frac", 0.2)),
        min_stage_negatives=int(train_doc.get("min_stage_negatives", 25)),
        seed=int(train_doc.get("seed", 0)),
    )
    targets_doc = doc["targets"]
    targets = CascadeTargets(
        d_min=float(targets_doc.get("d_min", 0.995)),
        f_max=float(targets_doc.get("f_max", 0.5)),
        f_overall=float(targets_doc.get("f_overall", 1e-6)),
    )
    meta = {"icons": str(len(positives)), "icon_seed": str(seed), "neg_layer": layer}
    return train_cascade(positives, source, targets, config, meta=meta)
