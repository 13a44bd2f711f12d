"""HTTP front for the candidate store: review API plus static UI hosting.

Endpoints (all JSON unless noted):

    GET  /api/v1/candidates?body=&layer=&min_consensus=&sort=&page=&page_size=&voter=
    GET  /api/v1/candidates/{id}
    GET  /api/v1/candidates/{id}/thumbnail.png     (image/png)
    POST /api/v1/candidates/{id}/votes             {verdict, voter_token}
    GET  /api/v1/export/hard-negatives?min_not_face=&max_face=&window=  (zip)
    GET  /api/v1/stats
    GET  /...                                      static review UI
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from facescan.candidates import record_to_doc
from facescan.service.store import CandidateStore, StoredCandidate, Tally

__all__ = ["ReviewServer", "serve_store"]

_CAND = re.compile(r"^/api/v1/candidates/([0-9a-f]{16})$")
_THUMB = re.compile(r"^/api/v1/candidates/([0-9a-f]{16})/thumbnail\.png$")
_VOTES = re.compile(r"^/api/v1/candidates/([0-9a-f]{16})/votes$")

FALLBACK_INDEX = b"""<!doctype html>
<meta charset="utf-8">
<title>facescan review API</title>
<body style="font-family: system-ui; max-width: 40em; margin: 3em auto">
<h1>facescan review service</h1>
<p>No UI bundle is installed. The API is live:</p>
<ul>
<li><a href="/api/v1/candidates">/api/v1/candidates</a></li>
<li><a href="/api/v1/stats">/api/v1/stats</a></li>
</ul>
<p>Point <code>serve --ui DIR</code> at a built review-ui bundle to serve it here.</p>
</body>
"""

_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
    ".map": "application/json",
    ".txt": "text/plain; charset=utf-8",
}


def candidate_doc(sc: StoredCandidate, tally: Tally, my_vote: str | None = None) -> dict:
    doc = record_to_doc(sc.record)
    doc["created_at"] = sc.created_at
    doc["thumbnail"] = f"/api/v1/candidates/{sc.candidate_id}/thumbnail.png"
    doc["tally"] = tally.to_doc()
    doc["my_vote"] = my_vote
    return doc


def _first_int(q: dict, name: str, default: int | None) -> int | None:
    if name not in q:
        return default
    try:
        return int(q[name][0])
    except ValueError:
        raise ValueError(f"{name} must be an integer")


def _make_handler(store: CandidateStore, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):
            pass

        def _send(self, code: int, body: bytes, ctype: str, extra: dict | None = None) -> None:
            self.send_response(code)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            for k, v in (extra or {}).items():
                self.send_header(k, v)
            self.end_headers()
            self.wfile.write(body)

        def _json(self, code: int, doc: dict) -> None:
            self._send(code, json.dumps(doc).encode(), "application/json")

        def _read_body(self) -> dict:
            n = int(self.headers.get("Content-Length") or 0)
            if n == 0:
                return {}
            return json.loads(self.rfile.read(n))

        # -- API: GET --------------------------------------------------------

        def do_GET(self):
            url = urlsplit(self.path)
            q = parse_qs(url.query)
            try:
                if url.path == "/api/v1/candidates":
                    self._list(q)
                elif m := _CAND.match(url.path):
                    self._one(m.group(1), q)
                elif m := _THUMB.match(url.path):
                    self._thumb(m.group(1))
                elif url.path == "/api/v1/export/hard-negatives":
                    self._export(q)
                elif url.path == "/api/v1/stats":
                    self._json(200, store.stats())
                elif url.path.startswith("/api/"):
                    self._json(404, {"error": "no such endpoint"})
                else:
                    self._static(url.path)
            except KeyError:
                self._json(404, {"error": "unknown candidate"})
            except ValueError as exc:
                self._json(400, {"error": str(exc)})

        def _list(self, q: dict) -> None:
            page = _first_int(q, "page", 1)
            page_size = _first_int(q, "page_size", 50)
            if page_size > 500:
                raise ValueError("page_size must be <= 500")
            voter = q.get("voter", [None])[0]
            rows, total = store.list_candidates(
                body=q.get("body", [None])[0],
                layer=q.get("layer", [None])[0],
                min_consensus=_first_int(q, "min_consensus", None),
                sort=q.get("sort", ["consensus"])[0],
                page=page,
                page_size=page_size,
            )
            items = [
                candidate_doc(sc, t, store.vote_of(sc.candidate_id, voter) if voter else None)
                for sc, t in rows
            ]
            self._json(
                200,
                {"items": items, "page": page, "page_size": page_size, "total": total},
            )

        def _one(self, cid: str, q: dict) -> None:
            sc = store.get(cid)
            voter = q.get("voter", [None])[0]
            my_vote = store.vote_of(cid, voter) if voter else None
            self._json(200, candidate_doc(sc, store.tally(cid), my_vote))

        def _thumb(self, cid: str) -> None:
            self._send(200, store.thumbnail_png(cid), "image/png")

        def _export(self, q: dict) -> None:
            export = store.export_hard_negatives(
                min_not_face=_first_int(q, "min_not_face", 3),
                max_face=_first_int(q, "max_face", 0),
                window=_first_int(q, "window", 24),
            )
            self._send(
                200,
                export.to_zip_bytes(),
                "application/zip",
                {"Content-Disposition": 'attachment; filename="hard-negatives.zip"'},
            )

        def _static(self, path: str) -> None:
            if ui_dir is None:
                self._send(200, FALLBACK_INDEX, "text/html; charset=utf-8")
                return
            name = path.lstrip("/") or "index.html"
            target = (ui_dir / name).resolve()
            if not str(target).startswith(str(ui_dir.resolve()) + "/") and target != ui_dir.resolve():
                self._json(404, {"error": "not found"})
                return
            if target.is_dir():
                target = target / "index.html"
            if not target.is_file():
                # SPA routing: unknown paths fall back to the app shell
                target = ui_dir / "index.html"
                if not target.is_file():
                    self._json(404, {"error": "not found"})
                    return
            ctype = _STATIC_TYPES.get(target.suffix, "application/octet-stream")
            self._send(200, target.read_bytes(), ctype)

        # -- API: POST -------------------------------------------------------

        def do_POST(self):
            url = urlsplit(self.path)
            m = _VOTES.match(url.path)
            if not m:
                self._json(404, {"error": "no such endpoint"})
                return
            try:
                doc = self._read_body()
            except json.JSONDecodeError:
                self._json(400, {"error": "body must be JSON"})
                return
            try:
                tally = store.cast_vote(
                    m.group(1), doc.get("verdict", ""), doc.get("voter_token", "")
                )
            except KeyError:
                self._json(404, {"error": "unknown candidate"})
                return
            except ValueError as exc:
                self._json(400, {"error": str(exc)})
                return
            self._json(200, tally.to_doc())

    return Handler


class ReviewServer:
    """The store's HTTP face, served from a daemon thread."""

    def __init__(
        self,
        store: CandidateStore,
        host: str = "127.0.0.1",
        port: int = 0,
        ui_dir: str | Path | None = None,
    ):
        self.store = store
        ui = Path(ui_dir) if ui_dir else None
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(store, ui))
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ReviewServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "ReviewServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve_store(
    store_dir: str, bind: str = "127.0.0.1:8751", ui_dir: str | None = None
) -> None:
    """Blocking CLI entry: serve one store until interrupted."""
    store = CandidateStore(store_dir)
    host, _, port = bind.partition(":")
    server = ReviewServer(store, host, int(port or 0), ui_dir=ui_dir)
    n = store.stats()["candidates"]
    print(f"review service on {server.url} ({n} candidates, store {store_dir})")
    try:
        server._httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server._httpd.server_close()
