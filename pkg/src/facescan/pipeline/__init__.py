"""Scan orchestration: jobs, partitioning, local and distributed execution."""

from facescan.pipeline.config import load_job, load_train, train_from_config
from facescan.pipeline.coordinator import Coordinator, CoordinatorServer, serve_coordinator
from facescan.pipeline.jobs import (
    DEFAULT_JOB_MAX_WINDOW,
    JobRegion,
    ScanJob,
    WorkUnit,
    job_from_doc,
    job_to_doc,
    partition,
)
from facescan.pipeline.report import JobReport, LayerTotals, build_report, dedup_records
from facescan.pipeline.runner import FetcherPool, WorkResult, execute_unit, run_local
from facescan.pipeline.worker import fetch_report, worker_run

__all__ = [
    "Coordinator",
    "CoordinatorServer",
    "DEFAULT_JOB_MAX_WINDOW",
    "FetcherPool",
    "JobRegion",
    "JobReport",
    "LayerTotals",
    "ScanJob",
    "WorkResult",
    "WorkUnit",
    "build_report",
    "dedup_records",
    "execute_unit",
    "fetch_report",
    "job_from_doc",
    "job_to_doc",
    "load_job",
    "load_train",
    "partition",
    "run_local",
    "serve_coordinator",
    "train_from_config",
    "worker_run",
]
