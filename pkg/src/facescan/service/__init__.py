"""Candidate review service: persistent store, voting, export, HTTP API."""

from facescan.service.http import ReviewServer, candidate_doc, serve_store
from facescan.service.store import (
    CandidateStore,
    HardNegativeExport,
    StoredCandidate,
    Tally,
    load_negative_patches,
    wilson_lower_bound,
)

__all__ = [
    "CandidateStore",
    "HardNegativeExport",
    "ReviewServer",
    "StoredCandidate",
    "Tally",
    "candidate_doc",
    "load_negative_patches",
    "serve_store",
    "wilson_lower_bound",
]
