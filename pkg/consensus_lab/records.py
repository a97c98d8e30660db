"""
Run record schema shared by DP2G, the baselines, the diagnostics and the harness.

Plain pydantic models so records serialize to JSON/CSV/SQL without custom encoders. Wall time
is kept in the summary but excluded from every deterministic output.
"""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

StopReason = Literal["tolerance", "round_cap", "skipped"]


class MetricsSample(BaseModel):
    round: int
    objective_residual: float = Field(ge=0)
    consensus_violation: float = Field(ge=0)
    optimality_residual: float = Field(ge=0)
    penalty: float = Field(ge=0)
    stationarity_bound: float = Field(ge=0)
    rho: float = Field(ge=0)


class OuterStep(BaseModel):
    """One outer iteration of DP2G."""

    k: int
    rho: float
    eps: float
    delta: float
    inner_iterations: int
    inner_converged: bool
    max_disagreement: float
    average_shift: float
    rounds: int


class RunSummary(BaseModel):
    converged: bool
    reason: StopReason
    total_rounds: int
    max_consensus_rounds: int = 0
    inner_iterations: int = 0
    outer_iterations: int = 0
    final_rho: float = 0.0
    # ||d Psi|| at the final iterate and penalty; dp2g only
    critical_residual: float | None = None
    wall_time: float = 0.0


class RecoveryReport(BaseModel):
    """Support recovery of an elastic-net solution against its ground truth."""

    precision: float
    recall: float
    l2_error: float
    threshold: float
    true_support: list[int]
    recovered_support: list[int]
    x_true: list[float]
    x_final: list[float]


class RunRecord(BaseModel):
    algorithm: str
    topology: str = ""
    problem: str = ""
    seed: int = 0
    fingerprint: str = ""
    samples: list[MetricsSample] = Field(default_factory=list)
    outer: list[OuterStep] = Field(default_factory=list)
    summary: RunSummary
    final_states: list[list[float]] = Field(default_factory=list)
    final_duals: list[list[float]] = Field(default_factory=list)
    recovery: RecoveryReport | None = None

    @model_validator(mode="after")
    def _rounds_increase(self) -> "RunRecord":
        rounds = [s.round for s in self.samples]
        if any(b <= a for a, b in zip(rounds, rounds[1:])):
            raise ValueError("metric rounds must be strictly increasing")
        return self

    def deterministic_dump(self) -> dict:
        """Everything except wall-clock time."""
        return self.model_dump(exclude={"summary": {"wall_time"}})
