"""Sparsity-pattern recovery of an elastic-net solution."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from consensus_lab.core.errors import ParameterError
from consensus_lab.objectives.problem import GroundTruth
from consensus_lab.records import RecoveryReport

# small relative to N(0, 1) coefficients
SUPPORT_THRESHOLD = 1e-4


class SupportRecovery(NamedTuple):
    precision: float
    recall: float
    l2_error: float


def recovered_support(x: np.ndarray, threshold: float = SUPPORT_THRESHOLD) -> tuple[int, ...]:
    return tuple(int(j) for j in np.flatnonzero(np.abs(x) > threshold))


def support_recovery_report(x_final, truth: GroundTruth, threshold: float = SUPPORT_THRESHOLD) -> SupportRecovery:
    """
    Precision and recall of {j : |x_j| > threshold} against the true support, and ||x - x_true||.

    An empty predicted support has precision 1.
    """
    x = np.asarray(x_final, dtype=float).reshape(-1)
    if x.shape != truth.x_true.shape:
        raise ParameterError(f"x_final has shape {x.shape}, ground truth {truth.x_true.shape}")
    predicted = set(recovered_support(x, threshold))
    actual = set(truth.support)
    hits = len(predicted & actual)
    precision = hits / len(predicted) if predicted else 1.0
    recall = hits / len(actual) if actual else 1.0
    return SupportRecovery(precision, recall, float(np.linalg.norm(x - truth.x_true)))


def recovery_report(x_final, truth: GroundTruth, threshold: float = SUPPORT_THRESHOLD) -> RecoveryReport:
    x = np.asarray(x_final, dtype=float).reshape(-1)
    precision, recall, l2_error = support_recovery_report(x, truth, threshold)
    return RecoveryReport(
        precision=precision,
        recall=recall,
        l2_error=l2_error,
        threshold=threshold,
        true_support=list(truth.support),
        recovered_support=list(recovered_support(x, threshold)),
        x_true=truth.x_true.tolist(),
        x_final=x.tolist(),
    )
