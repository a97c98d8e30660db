import numpy as np
import pytest
from prometheus_client import REGISTRY

from consensus_lab.core.config import settings
from consensus_lab.core.errors import ConfigError, RunError
from consensus_lab.core.sentry import init_sentry, tag_run
from consensus_lab.harness.config import AlgorithmSpec, load_config
from consensus_lab.harness.runner import run_cell, run_experiment, unconverged_required
from consensus_lab.harness.suites import SUITES, suite_config
from consensus_lab.harness.telemetry import record_run, start_metrics_server

TINY = """\
name: tiny
problem: {kind: ridge, n: 4, d_i: 20, m: 3}
topologies: [ring, grid]
algorithms: [dp2g, extra, dgd_fixed]
round_cap: 150
repeat: 2
"""


@pytest.fixture
def tiny(tmp_path):
    return load_config(TINY + f"output_dir: {tmp_path}\n")


def test_cell_shares_data_and_orders_records(tiny):
    cell = run_cell(tiny, tiny.topologies[0], seed=0)
    assert [r.algorithm for r in cell.records] == ["dp2g", "extra", "dgd_fixed"]
    assert all(r.topology == "ring" and r.seed == 0 for r in cell.records)
    assert all(r.fingerprint == tiny.fingerprint() for r in cell.records)
    dp = cell.records[0]
    assert dp.samples[0].round == 0
    assert dp.samples[-1].round == dp.summary.total_rounds
    assert all(r.summary.total_rounds <= 150 for r in cell.records)


def test_experiment_writes_outputs(tiny, tmp_path):
    records = run_experiment(tiny)
    # 3 algorithms x 2 topologies x 2 seeds
    assert len(records) == 12
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "runs.sqlite").exists()
    assert len(list((tmp_path / "metrics").glob("*.csv"))) == 12
    assert not (tmp_path / "plots").exists()


def test_experiment_is_deterministic(tiny, tmp_path):
    a = run_experiment(tiny, persist=False)
    b = run_experiment(tiny, persist=False)
    assert [r.deterministic_dump() for r in a] == [r.deterministic_dump() for r in b]


def test_noise_changes_results_but_stays_reproducible(tiny):
    noisy = tiny.model_copy(update={"noise": tiny.noise.model_copy(update={"comm_sigma": 1e-3})})
    a = run_cell(noisy, noisy.topologies[0], 0).records[0]
    b = run_cell(noisy, noisy.topologies[0], 0).records[0]
    clean = run_cell(tiny, tiny.topologies[0], 0).records[0]
    assert a.deterministic_dump() == b.deterministic_dump()
    assert not np.array_equal(a.final_states, clean.final_states)


def test_elastic_net_cell_has_recovery(tmp_path):
    config = load_config(
        "problem: {kind: elastic_net, n: 4, d_i: 30, m: 8, sparsity: 3}\n"
        "topology: ring\nalgorithms: [dp2g, nids]\nround_cap: 100\n"
    )
    dp, nids = run_cell(config, config.topologies[0], 1).records
    assert dp.recovery is not None
    assert len(dp.recovery.true_support) == 3
    assert nids.summary.reason == "skipped"


def test_unconverged_required_only_counts_required(tiny):
    records = run_experiment(tiny, persist=False)
    failed = unconverged_required(tiny, records)
    assert all(r.algorithm == "dp2g" and not r.summary.converged for r in failed)


def test_parallel_matches_serial(tiny):
    serial = run_experiment(tiny, persist=False)
    parallel = run_experiment(tiny.model_copy(update={"workers": 2}), persist=False)
    assert [r.deterministic_dump() for r in serial] == [r.deterministic_dump() for r in parallel]


def test_suites():
    config = suite_config("table1")
    assert [t.label for t in config.topologies] == ["ring", "grid4x5", "rg"]
    assert len(config.algorithms) == 5
    assert suite_config("elastic-net", round_cap=100).round_cap == 100
    assert set(SUITES) == {"table1", "table2", "elastic-net"}
    with pytest.raises(ConfigError):
        suite_config("table9")


def test_telemetry_counts_runs(tiny):
    record = run_cell(tiny, tiny.topologies[0], 0).records[1]
    labels = {"algorithm": "extra", "converged": str(record.summary.converged).lower()}
    before = REGISTRY.get_sample_value("consensus_lab_runs_total", labels) or 0.0
    record_run(record)
    assert REGISTRY.get_sample_value("consensus_lab_runs_total", labels) == before + 1
    assert start_metrics_server(None) is False


def test_failed_run_carries_context(tiny, monkeypatch):
    tagged = []
    monkeypatch.setattr("consensus_lab.harness.runner.tag_run", lambda *args: tagged.append(args))
    bad = tiny.model_copy(update={"algorithms": [AlgorithmSpec(name="dp2g", alpha=10.0)]})
    with pytest.raises(RunError) as exc_info:
        run_cell(bad, bad.topologies[0], seed=3)
    assert (exc_info.value.algorithm, exc_info.value.topology, exc_info.value.seed) == ("dp2g", "ring", 3)
    assert tagged == [("dp2g", "ring", 3)]


def test_sentry_disabled_without_dsn(monkeypatch):
    monkeypatch.setattr(settings, "SENTRY_DSN", None)
    assert init_sentry() is False
    # without a client tagging is a no-op
    tag_run("dp2g", "ring", 0)


def test_dp2g_records_lyapunov_residual(tiny):
    dp2g_record, extra_record, _ = run_cell(tiny, tiny.topologies[0], seed=0).records
    assert dp2g_record.summary.critical_residual is not None
    assert np.isfinite(dp2g_record.summary.critical_residual)
    assert extra_record.summary.critical_residual is None


def test_inadmissible_lyapunov_delta_skips_residual(tiny):
    # alpha just under 1/(3 L_max) with a tiny delta leaves c < 0
    config = tiny.model_copy(
        update={"lyapunov_delta": 0.01, "algorithms": [AlgorithmSpec(name="dp2g", alpha=0.33)]}
    )
    (record,) = run_cell(config, config.topologies[0], seed=0).records
    assert record.summary.critical_residual is None
