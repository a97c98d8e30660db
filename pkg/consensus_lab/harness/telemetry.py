"""
Prometheus counters for experiment runs.

Exposed over HTTP only when a metrics port is configured (CLI --metrics-port or
CONSENSUS_LAB_METRICS_PORT); otherwise the counters just accumulate in-process.
"""
from __future__ import annotations

import logging

from prometheus_client import Counter, start_http_server

from consensus_lab.records import RunRecord

logger = logging.getLogger("consensus_lab.harness.telemetry")

MET_RUNS = Counter("consensus_lab_runs_total", "Completed runs", ["algorithm", "converged"])
MET_ROUNDS = Counter("consensus_lab_communication_rounds_total", "Communication rounds spent", ["algorithm"])
MET_RUN_ERRORS = Counter("consensus_lab_run_errors_total", "Runs that raised", ["algorithm"])


def record_run(record: RunRecord) -> None:
    MET_RUNS.labels(algorithm=record.algorithm, converged=str(record.summary.converged).lower()).inc()
    MET_ROUNDS.labels(algorithm=record.algorithm).inc(record.summary.total_rounds)


def record_error(algorithm: str) -> None:
    MET_RUN_ERRORS.labels(algorithm=algorithm).inc()


def start_metrics_server(port: int | None) -> bool:
    if not port:
        return False
    try:
        start_http_server(port)
    except OSError as exc:
        logger.warning("metrics server not started on port %s: %s", port, exc)
        return False
    logger.info("metrics exposed on :%s/metrics", port)
    return True
