"""
Experiment orchestration.

A cell is one (topology, seed) pair. Within a cell every algorithm shares the same data,
graph and oracle; DP2G runs first so the baselines can be held to the accuracy it reached.
Cells are independent and may run in worker processes; results always come back in
configuration order, so the pipeline is a pure function of (config, seeds).
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from consensus_lab.core.errors import ConsensusLabError, ConstantValidationError, ParameterError, RunError
from consensus_lab.core.sentry import tag_run
from consensus_lab.diagnostics.lyapunov import critical_point_residual, lyapunov_constants
from consensus_lab.diagnostics.metrics import MetricsRecorder
from consensus_lab.diagnostics.oracle import centralized_oracle
from consensus_lab.harness import telemetry
from consensus_lab.harness.config import AlgorithmSpec, ExperimentConfig
from consensus_lab.harness.emit import emit_csv, emit_plots, emit_topology_plot
from consensus_lab.harness.noise import channel_for
from consensus_lab.harness.recovery import recovery_report
from consensus_lab.harness.seeding import split_seed
from consensus_lab.harness.store import save_records
from consensus_lab.network.mixing import metropolis_weights, validate_mixing
from consensus_lab.network.topology import Graph, TopologySpec
from consensus_lab.objectives.generate import generate_dataset
from consensus_lab.records import RunRecord
from consensus_lab.solver import dp2g
from consensus_lab.solver.baselines import BaselineConfig, run_baseline

logger = logging.getLogger("consensus_lab.harness.runner")

ELASTIC_NET_SIGMA_FRACTION = dp2g.ELASTIC_NET_SIGMA_FRACTION
# baselines are never asked for more accuracy than this
TARGET_FLOOR = 1e-12


@dataclass
class CellResult:
    topology: str
    seed: int
    graph: Graph
    records: list[RunRecord]


def _dp2g_steps(spec: AlgorithmSpec, problem, spectral) -> dp2g.StepSizes:
    fraction = spec.sigma_fraction
    if fraction is None:
        fraction = ELASTIC_NET_SIGMA_FRACTION if problem.kind == "elastic_net" else dp2g.DEFAULT_SIGMA_FRACTION
    steps = dp2g.default_stepsizes(problem.L_max, spectral, fraction)
    if spec.alpha is None and spec.sigma is None:
        return steps
    alpha = spec.alpha if spec.alpha is not None else steps.alpha
    sigma = spec.sigma if spec.sigma is not None else fraction / (alpha * (spectral.kappa_Z**2 or 1.0))
    return dp2g.StepSizes(alpha=alpha, sigma=sigma)


def _with_critical_residual(record: RunRecord, config: ExperimentConfig, problem, mixing, steps, rho: float) -> RunRecord:
    """Attach ||d Psi|| at the final DP2G iterate, with the configured Lyapunov delta."""
    try:
        constants = lyapunov_constants(steps.alpha, problem.L_max, config.lyapunov_delta)
    except (ConstantValidationError, ParameterError) as exc:
        logger.warning("no Lyapunov residual for this run: %s", exc)
        return record
    residual = critical_point_residual(
        np.array(record.final_states), np.array(record.final_duals), rho, problem, mixing, constants
    )
    return record.model_copy(update={"summary": record.summary.model_copy(update={"critical_residual": residual})})


def run_cell(config: ExperimentConfig, topology: TopologySpec, seed: int) -> CellResult:
    label = topology.label
    streams = split_seed(seed)
    spec = config.problem
    try:
        problem, truth = generate_dataset(
            spec.kind,
            spec.n,
            spec.d_i,
            spec.m,
            seed=spec.seed if spec.seed is not None else streams.data,
            sparsity=spec.sparsity,
            lam=spec.lam,
            lam1=spec.lam1,
            lam2=spec.lam2,
            noise_sigma=spec.noise_sigma,
        )
        graph = topology.build(seed=topology.seed if topology.seed is not None else streams.topology)
        mixing = metropolis_weights(graph)
        spectral = validate_mixing(mixing)
        oracle = centralized_oracle(problem)
    except ConsensusLabError as exc:
        tag_run("setup", label, seed)
        logger.exception("setup failed topology=%s seed=%s", label, seed)
        raise RunError(str(exc), algorithm="setup", topology=label, seed=seed) from exc

    logger.debug(
        "cell %s seed=%s: lambda_n=%.4f zeta=%.4f diameter=%s L_max=%.4g f*=%.10g",
        label, seed, spectral.lambda_n, spectral.zeta, spectral.diameter, problem.L_max, oracle.f_star,
    )
    fingerprint = config.fingerprint()
    zeros = np.zeros((problem.n, problem.m))
    consensus_target, optimality_target = config.consensus_target, config.optimality_target
    # dp2g first
    ordered = sorted(enumerate(config.algorithms), key=lambda item: item[1].name != "dp2g")
    records: dict[int, RunRecord] = {}
    for index, algo in ordered:
        perturb = channel_for(config.noise.comm_sigma, streams.noise_for(index))
        recorder = MetricsRecorder(problem, mixing, oracle, every=config.metrics_every)
        try:
            if algo.name == "dp2g":
                steps = _dp2g_steps(algo, problem, spectral)
                termination = dp2g.Termination(
                    round_cap=config.round_cap,
                    inner_iteration_cap=algo.inner_iteration_cap,
                    stopping=algo.stopping,
                    stabilization=config.stabilization,
                )
                recorder.final(zeros, zeros, config.schedules.rho0, 0)
                record = dp2g.run(
                    problem, mixing, config.schedules, steps, termination, seed,
                    perturb=perturb, sink=recorder, topology=label,
                )
                final_rho = record.outer[-1].rho if record.outer else config.schedules.rho0
                recorder.final(
                    np.array(record.final_states), np.array(record.final_duals), final_rho, record.summary.total_rounds
                )
                record = _with_critical_residual(record, config, problem, mixing, steps, final_rho)
                last = recorder.last
                consensus_target = max(last.consensus_violation, TARGET_FLOOR)
                optimality_target = max(last.optimality_residual, TARGET_FLOOR)
            else:
                baseline = BaselineConfig(
                    algorithm=algo.name,
                    alpha0=algo.alpha,
                    round_cap=config.round_cap,
                    consensus_target=consensus_target,
                    optimality_target=optimality_target,
                    force_nonsmooth=algo.force,
                )
                record = run_baseline(baseline, problem, mixing, recorder, perturb=perturb, seed=seed, topology=label)
        except ConsensusLabError as exc:
            tag_run(algo.name, label, seed)
            logger.exception("%s failed topology=%s seed=%s", algo.name, label, seed)
            raise RunError(str(exc), algorithm=algo.name, topology=label, seed=seed) from exc

        update = {"samples": recorder.samples, "fingerprint": fingerprint}
        if problem.kind == "elastic_net" and record.final_states:
            update["recovery"] = recovery_report(np.mean(record.final_states, axis=0), truth)
        records[index] = record.model_copy(update=update)
        logger.info(
            "%s %s seed=%s: converged=%s rounds=%s",
            algo.name, label, seed, record.summary.converged, record.summary.total_rounds,
        )
    return CellResult(topology=label, seed=seed, graph=graph, records=[records[i] for i in sorted(records)])


def _run_cell_args(args) -> CellResult:
    return run_cell(*args)


def run_cells(config: ExperimentConfig) -> list[CellResult]:
    jobs = [(config, topology, seed) for topology in config.topologies for seed in config.seed_list]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(jobs))) as pool:
            return list(pool.map(_run_cell_args, jobs))
    return [run_cell(*job) for job in jobs]


def run_experiment(config: ExperimentConfig, *, output_dir=None, persist: bool = True) -> list[RunRecord]:
    out = Path(output_dir or config.output_dir)
    logger.info(
        "experiment %s: %s algorithm(s) x %s topology(ies) x %s seed(s)",
        config.name, len(config.algorithms), len(config.topologies), len(config.seed_list),
    )
    try:
        cells = run_cells(config)
    except RunError as exc:
        telemetry.record_error(exc.algorithm)
        raise

    records = [r for cell in cells for r in cell.records]
    for record in records:
        telemetry.record_run(record)

    if persist:
        emit_csv(records, out)
        save_records(records, out, experiment=config.name)
        if config.plots:
            emit_plots(records, out)
            drawn = set()
            for cell in cells:
                if cell.topology not in drawn:
                    emit_topology_plot(cell.graph, cell.topology, out)
                    drawn.add(cell.topology)

    converged = sum(r.summary.converged for r in records)
    logger.info("experiment %s done: %s/%s run(s) converged", config.name, converged, len(records))
    return records


def unconverged_required(config: ExperimentConfig, records: list[RunRecord]) -> list[RunRecord]:
    required = {a.name for a in config.algorithms if a.is_required}
    return [
        r for r in records
        if r.algorithm in required and not r.summary.converged and r.summary.reason != "skipped"
    ]
