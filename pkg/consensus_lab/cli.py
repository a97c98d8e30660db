"""
Command-line entry point.

  consensus-lab run <config.yaml>      run an experiment described by a YAML config
  consensus-lab bench <suite>          run a built-in suite (table1, table2, elastic-net)
  consensus-lab report <records-dir>   print the round-count table stored in <records-dir>

Exit codes:
 - 0: every required run converged
 - 1: at least one required run hit the round cap
 - 2: configuration, numeric or output error
"""
from __future__ import annotations

import argparse
import logging
import sys

from pydantic import ValidationError

from consensus_lab import __version__
from consensus_lab.core.config import settings
from consensus_lab.core.errors import ConfigError, ConsensusLabError
from consensus_lab.core.sentry import init_sentry
from consensus_lab.harness.config import ExperimentConfig, parse_config
from consensus_lab.harness.emit import record_entries, round_table_markdown, summarize_rounds, write_round_table
from consensus_lab.harness.runner import run_experiment, unconverged_required
from consensus_lab.harness.store import load_runs
from consensus_lab.harness.suites import SUITES, TITLES, suite_config
from consensus_lab.harness.telemetry import start_metrics_server

logger = logging.getLogger("consensus_lab.cli")

EXIT_OK = 0
EXIT_UNCONVERGED = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consensus-lab", description="Decentralized consensus optimization experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--output-dir", help="where metrics, summaries, plots and runs.sqlite go")
        p.add_argument("--seed", type=int, help="master seed (replaces the config's seed list)")
        p.add_argument("--repeat", type=int, help="number of consecutive seeds starting at --seed")
        p.add_argument("--comm-sigma", type=float, help="std of Gaussian noise on exchanged messages")
        p.add_argument("--plots", action=argparse.BooleanOptionalAction, default=None, help="render figures")
        p.add_argument("--workers", type=int, help="worker processes for independent cells")
        p.add_argument("--metrics-port", type=int, default=settings.METRICS_PORT, help="expose Prometheus metrics")

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    experiment_flags(run)

    bench = sub.add_parser("bench", help="run a built-in suite")
    bench.add_argument("suite", choices=sorted(SUITES))
    experiment_flags(bench)

    report = sub.add_parser("report", help="summarize stored runs")
    report.add_argument("records_dir")
    return parser


def apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    update = {}
    if args.output_dir is not None:
        update["output_dir"] = args.output_dir
    if args.seed is not None:
        update.update(seed=args.seed, seeds=None)
    if args.repeat is not None:
        update.update(repeat=args.repeat, seeds=None)
    if args.comm_sigma is not None:
        update["noise"] = {"comm_sigma": args.comm_sigma}
    if args.plots is not None:
        update["plots"] = args.plots
    if args.workers is not None:
        update["workers"] = args.workers
    if not update:
        return config
    # revalidate so overrides obey the same invariants as the file
    try:
        return ExperimentConfig.model_validate({**config.model_dump(), **update})
    except ValidationError as exc:
        raise ConfigError(f"invalid command-line override: {exc.errors()[0]['msg']}", source="argv") from exc


def _run(config: ExperimentConfig, args: argparse.Namespace, title: str | None = None) -> int:
    start_metrics_server(args.metrics_port)
    records = run_experiment(config)
    stats = summarize_rounds(record_entries(records))
    write_round_table(stats, config.output_dir, title)
    print(round_table_markdown(stats, title) if title else round_table_markdown(stats))
    failed = unconverged_required(config, records)
    for record in failed:
        logger.warning(
            "required run unconverged: %s %s seed=%s after %s rounds",
            record.algorithm, record.topology, record.seed, record.summary.total_rounds,
        )
    return EXIT_UNCONVERGED if failed else EXIT_OK


def _report(records_dir: str) -> int:
    rows = load_runs(records_dir)
    stats = summarize_rounds((r.algorithm, r.topology, r.total_rounds, r.converged, r.reason) for r in rows)
    print(round_table_markdown(stats))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(asctime)s %(levelname)s %(name)s %(message)s")
    init_sentry()
    try:
        if args.command == "report":
            return _report(args.records_dir)
        if args.command == "run":
            config = apply_overrides(parse_config(args.config), args)
            return _run(config, args)
        config = apply_overrides(suite_config(args.suite), args)
        return _run(config, args, TITLES[args.suite])
    except ConsensusLabError as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
