"""A polling worker: claim, execute, submit, repeat.

Workers are stateless between units. Everything needed to run a unit rides
in the claim response (job regions, params, serialized models), so a worker
only needs the coordinator's address. Unit failures are reported back
rather than retried here; the coordinator owns the attempt budget.
"""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
import uuid

from facescan.pipeline.jobs import ScanJob, WorkUnit, job_from_doc
from facescan.pipeline.runner import FetcherPool, execute_unit, failed_result

__all__ = ["worker_run"]


def _post(url: str, doc: dict, timeout: float = 30.0) -> tuple[int, dict, dict]:
    body = json.dumps(doc).encode()
    req = urllib.request.Request(url, data=body, headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        raw = resp.read()
        headers = {k: v for k, v in resp.headers.items()}
        return resp.status, json.loads(raw) if raw else {}, headers


def _get(url: str, timeout: float = 30.0) -> tuple[int, dict]:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.status, json.loads(resp.read())


def worker_run(
    coordinator_url: str,
    *,
    worker_id: str | None = None,
    cache_dir=None,
    fixtures=None,
    poll_s: float = 0.25,
    sleep=time.sleep,
    max_units: int | None = None,
    kill_after_claims: int | None = None,
    verbose: bool = False,
) -> int:
    """Process units until the coordinator reports the job complete.

    Returns the number of units this worker submitted successfully.
    ``kill_after_claims`` simulates a crash: after that many claims the
    worker returns without submitting, leaving its last lease to expire.
    """
    base = coordinator_url.rstrip("/")
    wid = worker_id or f"w-{uuid.uuid4().hex[:8]}"
    fetchers = FetcherPool(cache_dir=cache_dir, fixtures=fixtures)
    jobs: dict[str, ScanJob] = {}
    done = 0
    claims = 0
    while True:
        status, doc, headers = _post(f"{base}/api/v1/units/claim", {"worker_id": wid})
        if status == 204:
            if headers.get("X-Job-Status") == "complete":
                return done
            sleep(poll_s)
            continue
        claims += 1
        unit = WorkUnit.from_doc(doc["unit"])
        job = jobs.get(unit.job_id)
        if job is None:
            job = jobs[unit.job_id] = job_from_doc(doc["job"])
        if kill_after_claims is not None and claims >= kill_after_claims:
            return done  # simulated crash: lease left dangling
        _post(f"{base}/api/v1/units/{unit.unit_id}/heartbeat", {"worker_id": wid})
        try:
            result = execute_unit(job, unit, fetchers)
        except Exception as exc:  # noqa: BLE001 - report, let coordinator retry
            result = failed_result(unit, f"{type(exc).__name__}: {exc}")
        status, reply, _ = _post(f"{base}/api/v1/units/{unit.unit_id}/result", result.to_doc())
        if status == 200 and reply.get("accepted") and not result.failed:
            done += 1
            if verbose:
                print(f"{wid}: {unit.unit_id} done ({len(result.groups)} groups)")
        if max_units is not None and done >= max_units:
            return done


def fetch_report(coordinator_url: str, job_id: str) -> dict:
    """GET the coordinator's report document for a job."""
    _, doc = _get(f"{coordinator_url.rstrip('/')}/api/v1/jobs/{job_id}/report")
    return doc
