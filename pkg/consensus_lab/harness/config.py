"""
Experiment configuration: a YAML document validated into pydantic models.

Minimal document:

    problem: ridge
    topology: ring
    algorithm: dp2g

Everything else defaults to the standard experimental setup (n=20 agents, 500 samples each,
m=50, penalty schedule 1e-2 * 1.2^k capped at 100, hybrid inner stopping, 5000-round cap).
Unknown keys are rejected and every validation error is reported with its YAML line.
"""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from consensus_lab.core.config import settings
from consensus_lab.core.errors import ConfigError
from consensus_lab.network.topology import TopologySpec
from consensus_lab.objectives.problem import ProblemKind
from consensus_lab.solver.dp2g import Schedules, StoppingMode

logger = logging.getLogger("consensus_lab.harness.config")

AlgorithmName = Literal["dp2g", "dgd_fixed", "dgd_diminishing", "extra", "nids"]
TOPOLOGY_ALIASES = {"rg": "random_geometric", "rgg": "random_geometric"}
PROBLEM_ALIASES = {"elastic-net": "elastic_net", "elasticnet": "elastic_net", "lasso": "elastic_net"}


class ProblemSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ProblemKind = "ridge"
    n: int = Field(default=20, ge=2)
    d_i: int = Field(default=500, ge=1)
    m: int = Field(default=50, ge=1)
    lam: float = Field(default=1e-2, ge=0)
    lam1: float = Field(default=5e-3, gt=0)
    lam2: float = Field(default=1e-2, gt=0)
    sparsity: int | None = Field(default=None, ge=0)
    noise_sigma: float = Field(default=0.1, ge=0)
    # fixed data seed; None draws data from the master seed
    seed: int | None = None

    @model_validator(mode="after")
    def _check_sparsity(self) -> "ProblemSpec":
        if self.sparsity is not None and self.sparsity > self.m:
            raise ValueError(f"sparsity {self.sparsity} exceeds m={self.m}")
        return self


class AlgorithmSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: AlgorithmName
    # dp2g: primal step; baselines: base step. None picks the algorithm's default rule.
    alpha: float | None = Field(default=None, gt=0)
    # dp2g only: explicit dual step, or a fraction of 1 / (alpha kappa_Z^2)
    sigma: float | None = Field(default=None, gt=0)
    sigma_fraction: float | None = Field(default=None, gt=0, lt=1)
    stopping: StoppingMode = "hybrid"
    inner_iteration_cap: int = Field(default_factory=lambda: settings.INNER_ITERATION_CAP, gt=0)
    # baselines: run on the elastic net anyway
    force: bool = False
    # an unconverged run of a required algorithm makes the CLI exit nonzero; default: dp2g only
    required: bool | None = None

    @property
    def is_required(self) -> bool:
        return self.name == "dp2g" if self.required is None else self.required


class NoiseSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    comm_sigma: float = Field(default=0.0, ge=0)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    problem: ProblemSpec = Field(default_factory=ProblemSpec)
    topologies: list[TopologySpec] = Field(default_factory=lambda: [TopologySpec()], min_length=1)
    algorithms: list[AlgorithmSpec] = Field(min_length=1)
    schedules: Schedules = Field(default_factory=Schedules)
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    round_cap: int = Field(default_factory=lambda: settings.ROUND_CAP, gt=0)
    output_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)
    seed: int = 0
    repeat: int = Field(default=1, ge=1)
    # explicit seed list; overrides seed/repeat
    seeds: list[int] | None = None
    # stabilization factor of the outer termination test
    stabilization: float = Field(default=1e-3, gt=0)
    # baselines: targets used when no dp2g run of the same cell supplies them
    consensus_target: float = Field(default=1e-3, gt=0)
    optimality_target: float = Field(default=1e-3, gt=0)
    lyapunov_delta: float = Field(default=0.2, gt=0, le=0.2)
    metrics_every: int = Field(default=1, ge=1)
    plots: bool = Field(default_factory=lambda: settings.PLOTS)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _expand_shorthands(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if "topology" in data:
            if "topologies" in data:
                raise ValueError("give either 'topology' or 'topologies', not both")
            data["topologies"] = data.pop("topology")
        if "algorithm" in data:
            if "algorithms" in data:
                raise ValueError("give either 'algorithm' or 'algorithms', not both")
            data["algorithms"] = data.pop("algorithm")

        problem = data.get("problem")
        if isinstance(problem, str):
            data["problem"] = {"kind": PROBLEM_ALIASES.get(problem, problem)}
        elif isinstance(problem, dict) and isinstance(problem.get("kind"), str):
            data["problem"] = {**problem, "kind": PROBLEM_ALIASES.get(problem["kind"], problem["kind"])}
        n = data["problem"].get("n", 20) if isinstance(data.get("problem"), dict) else 20

        if "topologies" in data:
            topologies = data["topologies"]
            if not isinstance(topologies, list):
                topologies = [topologies]
            expanded = []
            for t in topologies:
                if isinstance(t, str):
                    t = {"kind": t}
                if isinstance(t, dict):
                    t = dict(t)
                    if isinstance(t.get("kind"), str):
                        t["kind"] = TOPOLOGY_ALIASES.get(t["kind"], t["kind"])
                    t.setdefault("n", n)
                expanded.append(t)
            data["topologies"] = expanded

        if "algorithms" in data:
            algorithms = data["algorithms"]
            if not isinstance(algorithms, list):
                algorithms = [algorithms]
            data["algorithms"] = [{"name": a} if isinstance(a, str) else a for a in algorithms]
        return data

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentConfig":
        for t in self.topologies:
            if t.n != self.problem.n:
                raise ValueError(f"topology {t.label} has n={t.n}, problem has n={self.problem.n}")
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise ValueError("each algorithm may appear only once")
        return self

    @property
    def seed_list(self) -> list[int]:
        if self.seeds:
            return list(self.seeds)
        return [self.seed + r for r in range(self.repeat)]

    def fingerprint(self) -> str:
        """Stable digest of every setting that influences results."""
        payload = self.model_dump(mode="json", exclude={"output_dir", "plots", "workers", "name"})
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _line_of(root: yaml.Node | None, loc: tuple) -> int | None:
    """Best-effort 1-based line of the deepest node along a validation error location."""
    aliases = {"topologies": "topology", "algorithms": "algorithm"}
    node, line = root, None
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            match = None
            for key, value in node.value:
                if key.value == part or key.value == aliases.get(part):
                    match = (key, value)
                    break
            if match is None:
                break
            line = match[0].start_mark.line + 1
            node = match[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            break
    if line is None and root is not None:
        line = root.start_mark.line + 1
    return line


def load_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ConfigError(f"invalid YAML: {exc.problem}", line=line, source=source) from exc
    if data is None:
        raise ConfigError("empty configuration", source=source)
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping", line=1, source=source)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = tuple(first["loc"])
        where = ".".join(str(p) for p in loc) or "<root>"
        extra = f" (+{exc.error_count() - 1} more)" if exc.error_count() > 1 else ""
        raise ConfigError(f"{where}: {first['msg']}{extra}", line=_line_of(root, loc), source=source) from exc


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", source=str(path)) from exc
    config = load_config(text, source=str(path))
    logger.debug("parsed %s: %s algorithm(s) x %s topology(ies) x %s seed(s)",
                 path, len(config.algorithms), len(config.topologies), len(config.seed_list))
    return config


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)
