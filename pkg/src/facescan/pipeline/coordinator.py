"""Work distribution: lease-based coordinator and its HTTP face.

All coordination state mutates under one lock, so correctness never depends
on request interleaving. Leases expire lazily: every state-changing call
first sweeps timed-out leases back to pending (or to failed once the attempt
budget is spent). Results are accepted exactly once per unit; later
submissions are acknowledged and discarded.
"""

from __future__ import annotations

import json
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from facescan.pipeline.jobs import ScanJob, job_to_doc, partition
from facescan.pipeline.report import JobReport, build_report
from facescan.pipeline.runner import WorkResult, failed_result

__all__ = ["Coordinator", "CoordinatorServer", "serve_coordinator"]

DEFAULT_LEASE_S = 60.0
MAX_ATTEMPTS = 3


class Coordinator:
    def __init__(
        self,
        job: ScanJob,
        lease_seconds: float = DEFAULT_LEASE_S,
        max_attempts: int = MAX_ATTEMPTS,
        clock=time.monotonic,
    ):
        if lease_seconds <= 0:
            raise ValueError("lease_seconds must be positive")
        self.job = job
        self.lease_seconds = lease_seconds
        self.max_attempts = max_attempts
        self._clock = clock
        self._units = partition(job)
        self._by_id = {u.unit_id: u for u in self._units}
        self._results: dict[str, WorkResult] = {}
        self._job_doc = job_to_doc(job)
        self._lock = threading.Lock()

    # -- state machine (all under lock) -------------------------------------

    def _sweep(self, now: float) -> None:
        for u in self._units:
            if u.status == "leased" and u.lease_expiry is not None and u.lease_expiry <= now:
                u.lease_expiry = None
                u.status = "failed" if u.attempt >= self.max_attempts else "pending"

    def claim(self, worker_id: str = "") -> dict | None:
        """Lease the first available unit; None when nothing is claimable."""
        now = self._clock()
        with self._lock:
            self._sweep(now)
            for u in self._units:
                if u.status == "pending":
                    u.status = "leased"
                    u.attempt += 1
                    u.lease_expiry = now + self.lease_seconds
                    return {"unit": u.to_doc(), "job": self._job_doc, "worker_id": worker_id}
            return None

    def heartbeat(self, unit_id: str) -> float | None:
        """Extend a live lease; None when the unit is not currently leased."""
        now = self._clock()
        with self._lock:
            self._sweep(now)
            u = self._by_id.get(unit_id)
            if u is None:
                raise KeyError(unit_id)
            if u.status != "leased":
                return None
            u.lease_expiry = now + self.lease_seconds
            return u.lease_expiry

    def submit(self, result: WorkResult) -> bool:
        """Store a unit result. Returns False for duplicates (discarded)."""
        now = self._clock()
        with self._lock:
            self._sweep(now)
            u = self._by_id.get(result.unit_id)
            if u is None:
                raise KeyError(result.unit_id)
            if u.status == "done":
                return False
            if result.failed:
                u.lease_expiry = None
                u.status = "failed" if u.attempt >= self.max_attempts else "pending"
                return True
            self._results[result.unit_id] = result
            u.status = "done"
            u.lease_expiry = None
            return True

    # -- progress ------------------------------------------------------------

    @property
    def complete(self) -> bool:
        with self._lock:
            self._sweep(self._clock())
            return all(u.status in ("done", "failed") for u in self._units)

    def progress(self) -> dict:
        with self._lock:
            self._sweep(self._clock())
            counts: dict[str, int] = {}
            for u in self._units:
                counts[u.status] = counts.get(u.status, 0) + 1
            return counts

    def report(self) -> JobReport:
        """Final aggregation; identical to run_local on the same inputs."""
        with self._lock:
            self._sweep(self._clock())
            if not all(u.status in ("done", "failed") for u in self._units):
                raise RuntimeError("job still running")
            results = [
                self._results.get(u.unit_id) or failed_result(u, "failed after retries")
                for u in self._units
            ]
        return build_report(self.job, self._units, results)

    def report_doc(self) -> dict:
        counts = self.progress()
        if counts.get("done", 0) + counts.get("failed", 0) == len(self._units):
            doc = self.report().to_doc()
            doc["status"] = "complete"
            return doc
        return {"job_id": self.job.job_id, "status": "running", "units": counts}


# -- HTTP ---------------------------------------------------------------------

_CLAIM = re.compile(r"^/api/v1/units/claim$")
_HEARTBEAT = re.compile(r"^/api/v1/units/([^/]+)/heartbeat$")
_RESULT = re.compile(r"^/api/v1/units/([^/]+)/result$")
_REPORT = re.compile(r"^/api/v1/jobs/([^/]+)/report$")


def _make_handler(coord: Coordinator):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):  # tests stay quiet
            pass

        def _json(self, code: int, doc: dict, extra_headers: dict | None = None) -> None:
            body = json.dumps(doc).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            for k, v in (extra_headers or {}).items():
                self.send_header(k, v)
            self.end_headers()
            self.wfile.write(body)

        def _body(self) -> dict:
            n = int(self.headers.get("Content-Length") or 0)
            if n == 0:
                return {}
            return json.loads(self.rfile.read(n))

        def do_POST(self):
            if _CLAIM.match(self.path):
                doc = self._body()
                leased = coord.claim(doc.get("worker_id", ""))
                if leased is None:
                    status = "complete" if coord.complete else "running"
                    self.send_response(204)
                    self.send_header("X-Job-Id", coord.job.job_id)
                    self.send_header("X-Job-Status", status)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                self._json(200, leased)
                return
            m = _HEARTBEAT.match(self.path)
            if m:
                try:
                    expiry = coord.heartbeat(m.group(1))
                except KeyError:
                    self._json(404, {"error": "unknown unit"})
                    return
                if expiry is None:
                    self._json(409, {"error": "unit not leased"})
                    return
                self._json(200, {"lease_expiry": expiry})
                return
            m = _RESULT.match(self.path)
            if m:
                doc = self._body()
                doc["unit_id"] = m.group(1)
                try:
                    accepted = coord.submit(WorkResult.from_doc(doc))
                except KeyError:
                    self._json(404, {"error": "unknown unit"})
                    return
                self._json(200, {"accepted": accepted})
                return
            self._json(404, {"error": "no such endpoint"})

        def do_GET(self):
            m = _REPORT.match(self.path)
            if m:
                if m.group(1) != coord.job.job_id:
                    self._json(404, {"error": "unknown job"})
                    return
                self._json(200, coord.report_doc())
                return
            self._json(404, {"error": "no such endpoint"})

    return Handler


class CoordinatorServer:
    """A coordinator bound to an HTTP port, served from a daemon thread."""

    def __init__(self, coord: Coordinator, host: str = "127.0.0.1", port: int = 0):
        self.coordinator = coord
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(coord))
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "CoordinatorServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "CoordinatorServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve_coordinator(job: ScanJob, bind: str = "127.0.0.1:8750", lease_seconds: float = DEFAULT_LEASE_S):
    """Blocking CLI entry: run the coordinator until interrupted."""
    host, _, port = bind.partition(":")
    coord = Coordinator(job, lease_seconds=lease_seconds)
    server = CoordinatorServer(coord, host, int(port or 0))
    print(f"coordinator for job {job.job_id!r} on {server.url} ({len(coord._units)} units)")
    try:
        server._httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server._httpd.server_close()
