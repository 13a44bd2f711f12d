"""Command line entry points.

    facescan train --config train.toml --out model.fcc
    facescan scan --job job.toml --workers 4 --out candidates.jsonl
    facescan coordinator --job job.toml --bind 127.0.0.1:8750
    facescan worker --coordinator http://127.0.0.1:8750
    facescan report --job-id ID --coordinator http://127.0.0.1:8750
    facescan ingest --store DIR --candidates candidates.jsonl --job job.toml
    facescan serve --store DIR --bind 127.0.0.1:8751
"""

from __future__ import annotations

import argparse
import json
import sys

from facescan.candidates import write_candidates


def _cmd_train(args) -> int:
    from facescan.classifier import save_model
    from facescan.pipeline import load_train, train_from_config

    doc = load_train(args.config)
    cascade, report = train_from_config(doc)
    save_model(cascade, args.out)
    print(f"saved {args.out}: {len(cascade.stages)} stages, {cascade.total_weak} weak classifiers")
    for i, st in enumerate(report.stages):
        print(
            f"  stage {i}: {st.n_weak} weak, holdout detection {st.detection_holdout:.4f}, "
            f"stage fp {st.fp_stage:.3f}"
        )
    print(f"cumulative fp estimate {report.fp_estimate:.3g} (target reached: {report.reached_target})")
    for note in report.notes:
        print(f"note: {note}")
    return 0


def _cmd_scan(args) -> int:
    from facescan.pipeline import load_job, run_local

    job, options = load_job(args.job)
    cache_dir = args.cache if args.cache else options.get("cache_dir")
    report = run_local(job, worker_count=args.workers, cache_dir=cache_dir)
    n = write_candidates(args.out, report.candidates)
    _print_report(report.to_doc())
    print(f"wrote {n} candidates to {args.out}")
    return 0 if not report.failed_units else 1


def _cmd_coordinator(args) -> int:
    from facescan.pipeline import load_job, serve_coordinator

    job, _ = load_job(args.job)
    serve_coordinator(job, bind=args.bind, lease_seconds=args.lease)
    return 0


def _cmd_worker(args) -> int:
    from facescan.pipeline import worker_run

    done = worker_run(args.coordinator, cache_dir=args.cache, verbose=True)
    print(f"worker finished: {done} units")
    return 0


def _cmd_report(args) -> int:
    from facescan.pipeline import fetch_report

    doc = fetch_report(args.coordinator, args.job_id)
    _print_report(doc)
    return 0


def _cmd_serve(args) -> int:
    from facescan.service import serve_store

    serve_store(args.store, bind=args.bind, ui_dir=args.ui)
    return 0


def _cmd_ingest(args) -> int:
    from facescan.pipeline import load_job
    from facescan.service import CandidateStore

    job, options = load_job(args.job)
    cache_dir = args.cache if args.cache else options.get("cache_dir")
    store = CandidateStore(args.store)
    sources = [r.source for r in job.regions]
    new = store.ingest_file(args.candidates, sources, cache_dir=cache_dir)
    print(f"ingested {new} new candidates into {args.store}")
    return 0


def _print_report(doc: dict) -> None:
    if doc.get("status") != "complete":
        print(json.dumps(doc, indent=2))
        return
    print(f"job {doc['job_id']}: {doc['done_units']}/{doc['unit_count']} units done")
    for key, t in doc["totals"].items():
        print(
            f"  {key}: scanned {t['pixels_scanned']:,} px, missing {t['pixels_missing']:,} px, "
            f"{t['windows_evaluated']:,} windows evaluated"
        )
    by_cons = doc.get("candidates_by_consensus", {})
    cons = ", ".join(f"{v} @ consensus {k}" for k, v in sorted(by_cons.items()))
    print(f"  candidates: {len(doc['candidates'])}" + (f" ({cons})" if cons else ""))
    if doc["failed_units"]:
        print(f"  FAILED units: {', '.join(doc['failed_units'])}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facescan", description="Planetary face-structure scanner")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a cascade on synthetic icons")
    p.add_argument("--config", required=True, help="training TOML")
    p.add_argument("--out", required=True, help="output model path (.fcc)")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("scan", help="run a scan job on local threads")
    p.add_argument("--job", required=True, help="job TOML")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="candidate JSONL output")
    p.add_argument("--cache", default=None, help="tile cache directory")
    p.set_defaults(fn=_cmd_scan)

    p = sub.add_parser("coordinator", help="serve a job to remote workers")
    p.add_argument("--job", required=True)
    p.add_argument("--bind", default="127.0.0.1:8750")
    p.add_argument("--lease", type=float, default=60.0, help="unit lease seconds")
    p.set_defaults(fn=_cmd_coordinator)

    p = sub.add_parser("worker", help="process units from a coordinator")
    p.add_argument("--coordinator", required=True, help="coordinator base URL")
    p.add_argument("--cache", default=None)
    p.set_defaults(fn=_cmd_worker)

    p = sub.add_parser("report", help="fetch a job report from a coordinator")
    p.add_argument("--job-id", required=True)
    p.add_argument("--coordinator", default="http://127.0.0.1:8750")
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("serve", help="run the candidate review service")
    p.add_argument("--store", required=True, help="store directory")
    p.add_argument("--bind", default="127.0.0.1:8751")
    p.add_argument("--ui", default=None, help="static review-ui bundle directory")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("ingest", help="load scan candidates into a review store")
    p.add_argument("--store", required=True, help="store directory")
    p.add_argument("--candidates", required=True, help="candidate JSONL from a scan")
    p.add_argument("--job", required=True, help="job TOML (supplies the tile sources)")
    p.add_argument("--cache", default=None)
    p.set_defaults(fn=_cmd_ingest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
