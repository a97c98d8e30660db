from consensus_lab.diagnostics.lyapunov import (
    LyapunovConstants,
    lyapunov_constants,
    lyapunov_descent_check,
    lyapunov_value,
    saddle_distance_margins,
    step_length_margins,
)
from consensus_lab.diagnostics.metrics import MetricsRecorder, compute_metrics, stationarity_bound
from consensus_lab.diagnostics.oracle import OracleResult, centralized_oracle
from consensus_lab.diagnostics.rates import RateFit, linear_rate_fit

__all__ = [
    "LyapunovConstants",
    "MetricsRecorder",
    "OracleResult",
    "RateFit",
    "centralized_oracle",
    "compute_metrics",
    "linear_rate_fit",
    "lyapunov_constants",
    "lyapunov_descent_check",
    "lyapunov_value",
    "saddle_distance_margins",
    "stationarity_bound",
    "step_length_margins",
]
