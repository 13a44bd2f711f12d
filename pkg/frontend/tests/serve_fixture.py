"""Seeded review service for the frontend integration tests.

Builds a throwaway store with reviewed candidates over two bodies, starts the
HTTP server on an ephemeral port, prints "URL http://..." and serves until
stdin closes.
"""

import sys
import tempfile
from pathlib import Path

from facescan.candidates import CandidateRecord, candidate_id
from facescan.geo import MARS, MOON
from facescan.service import CandidateStore, ReviewServer
from facescan.tiles import SourceKind, TileSourceSpec


def spec(body):
    return TileSourceSpec(kind=SourceKind.FIXTURE, uri="terrain", layer="terrain", body=body)


def record(px, py, w, body):
    bbox = (px, py, w, w)
    return CandidateRecord(
        candidate_id=candidate_id(body, "terrain", 3, bbox),
        body=body,
        layer="terrain",
        lonlat=(0.0, 0.0),
        zoom=3,
        bbox_px=bbox,
        consensus=1,
        detector_ids=("haar",),
        neighbor_count=3,
        scores=(("haar", 2.0),),
        job_id="seed",
    )


def main():
    tmp = Path(tempfile.mkdtemp(prefix="review-fixture-"))
    store = CandidateStore(tmp / "store")
    mars = [record(40 + 90 * i, 64 + 40 * i, 28 + 2 * i, "mars") for i in range(7)]
    moon = [record(30 + 70 * i, 400 + 30 * i, 26 + 3 * i, "moon") for i in range(4)]
    store.ingest(mars, spec(MARS), cache_dir=str(tmp / "cache"))
    store.ingest(moon, spec(MOON), cache_dir=str(tmp / "cache"))

    counts = {  # index -> (face, not_face); the last card of each body stays unreviewed
        0: (5, 0), 1: (9, 1), 2: (3, 1), 3: (1, 0), 4: (2, 2), 5: (0, 3),
        7: (4, 0), 8: (1, 1), 9: (0, 2),
    }
    everything = mars + moon
    for idx, (face, not_face) in counts.items():
        cid = everything[idx].candidate_id
        for k in range(face):
            store.cast_vote(cid, "face", f"voter-f{k}")
        for k in range(not_face):
            store.cast_vote(cid, "not_face", f"voter-n{k}")

    with ReviewServer(store) as server:
        print(f"URL {server.url}", flush=True)
        sys.stdin.read()


if __name__ == "__main__":
    main()
