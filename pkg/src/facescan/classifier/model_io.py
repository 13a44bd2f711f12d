"""Cascade model files: versioned, line-oriented, diffable text.

Floats are written with repr() so parsing returns bit-identical values and
a save/load/save round trip is byte-stable.
"""

from __future__ import annotations

import os

from facescan.classifier.boosting import WeakClassifier
from facescan.classifier.cascade import Cascade, CascadeStage
from facescan.imaging import BBFFeature, HaarFeature, HaarKind

MAGIC = "FACESCAN-CASCADE"
VERSION = "v1"


def dumps_model(cascade: Cascade) -> str:
    lines = [f"{MAGIC} {VERSION}"]
    lines.append(f"family {cascade.family}")
    lines.append(f"base_window {cascade.base_window}")
    for key, value in cascade.meta:
        if "\n" in key or "\n" in value or " " in key:
            raise ValueError(f"meta key/value not encodable: {key!r}")
        lines.append(f"meta {key} {value}")
    lines.append(f"stages {len(cascade.stages)}")
    for stage in cascade.stages:
        lines.append(f"stage {float(stage.threshold)!r} {len(stage.weak)}")
        for wc in stage.weak:
            if isinstance(wc.feature, HaarFeature):
                x, y, w, h = wc.feature.rect
                head = f"haar {wc.feature.kind.value} {x} {y} {w} {h}"
            else:
                a, b = wc.feature.rect_a, wc.feature.rect_b
                head = "bbf " + " ".join(str(int(v)) for v in (*a, *b))
            lines.append(f"{head} {float(wc.threshold)!r} {int(wc.polarity)} {float(wc.alpha)!r}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def parses_model(text: str) -> Cascade:
    lines = text.splitlines()
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise ValueError("truncated model file")
        line = lines[pos]
        pos += 1
        return line

    header = take().split()
    if len(header) != 2 or header[0] != MAGIC:
        raise ValueError("not a cascade model file")
    if header[1] != VERSION:
        raise ValueError(f"unsupported model version {header[1]!r}")

    family = None
    base_window = None
    meta: list[tuple[str, str]] = []
    n_stages = None
    while n_stages is None:
        parts = take().split(maxsplit=2)
        if parts[0] == "family":
            family = parts[1]
        elif parts[0] == "base_window":
            base_window = int(parts[1])
        elif parts[0] == "meta":
            meta.append((parts[1], parts[2] if len(parts) > 2 else ""))
        elif parts[0] == "stages":
            n_stages = int(parts[1])
        else:
            raise ValueError(f"unexpected header line: {parts[0]!r}")
    if family is None or base_window is None:
        raise ValueError("model header missing family or base_window")

    stages = []
    for _ in range(n_stages):
        parts = take().split()
        if parts[0] != "stage" or len(parts) != 3:
            raise ValueError(f"malformed stage line: {' '.join(parts)!r}")
        threshold = float(parts[1])
        weak = []
        for _ in range(int(parts[2])):
            w = take().split()
            if w[0] == "haar":
                if len(w) != 9:
                    raise ValueError(f"malformed haar line: {' '.join(w)!r}")
                feature = HaarFeature(HaarKind(w[1]), tuple(int(v) for v in w[2:6]), base_window)
                thr, pol, alpha = float(w[6]), int(w[7]), float(w[8])
            elif w[0] == "bbf":
                if len(w) != 12:
                    raise ValueError(f"malformed bbf line: {' '.join(w)!r}")
                nums = [int(v) for v in w[1:9]]
                feature = BBFFeature(tuple(nums[:4]), tuple(nums[4:]), base_window)
                thr, pol, alpha = float(w[9]), int(w[10]), float(w[11])
            else:
                raise ValueError(f"unknown weak classifier kind {w[0]!r}")
            weak.append(WeakClassifier(feature, thr, pol, alpha))
        stages.append(CascadeStage(tuple(weak), threshold))
    if take().strip() != "end":
        raise ValueError("missing end marker")
    return Cascade(base_window, family, tuple(stages), tuple(meta))


def save_model(cascade: Cascade, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(cascade))
    os.replace(tmp, path)


def load_model(path: str | os.PathLike) -> Cascade:
    with open(path, "r", encoding="utf-8") as fh:
        return parses_model(fh.read())
