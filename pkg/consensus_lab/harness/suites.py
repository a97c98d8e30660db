"""
Built-in benchmark suites.

  table1       ridge regression on ring / grid / random geometric, DP2G against the four baselines
  table2       logistic regression, same layout
  elastic-net  sparse elastic net on the random geometric graph, DP2G with support recovery
"""
from __future__ import annotations

from typing import Any

from consensus_lab.core.errors import ConfigError
from consensus_lab.harness.config import ExperimentConfig

ALL_ALGORITHMS = ["dp2g", "dgd_fixed", "dgd_diminishing", "extra", "nids"]
ALL_TOPOLOGIES = ["ring", "grid", "random_geometric"]

SUITES: dict[str, dict[str, Any]] = {
    "table1": {
        "name": "table1",
        "problem": {"kind": "ridge"},
        "topologies": ALL_TOPOLOGIES,
        "algorithms": ALL_ALGORITHMS,
    },
    "table2": {
        "name": "table2",
        "problem": {"kind": "logistic"},
        "topologies": ALL_TOPOLOGIES,
        "algorithms": ALL_ALGORITHMS,
    },
    "elastic-net": {
        "name": "elastic-net",
        "problem": {"kind": "elastic_net", "sparsity": 15},
        "topologies": ["random_geometric"],
        "algorithms": ALL_ALGORITHMS,
    },
}

TITLES = {
    "table1": "Ridge regression: communication rounds to reach the stopping tolerance",
    "table2": "Logistic regression: communication rounds to reach the stopping tolerance",
    "elastic-net": "Elastic net: communication rounds to reach the stopping tolerance",
}


def suite_config(name: str, **overrides: Any) -> ExperimentConfig:
    """ExperimentConfig of a built-in suite; keyword overrides replace top-level keys."""
    try:
        base = SUITES[name]
    except KeyError:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}") from None
    data = {**base, **{k: v for k, v in overrides.items() if v is not None}}
    return ExperimentConfig.model_validate(data)
