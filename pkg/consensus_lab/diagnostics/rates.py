"""Log-linear fits of distance-to-optimum traces."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from consensus_lab.core.errors import InsufficientDataError

logger = logging.getLogger("consensus_lab.diagnostics.rates")

# below this, float noise dominates the distance
DISTANCE_FLOOR = 1e-12
MIN_POINTS = 20


@dataclass(frozen=True)
class RateFit:
    slope: float
    r_squared: float
    points: int
    # the trace did not move at all
    flat: bool = False

    @property
    def contraction(self) -> float:
        """Per-iteration factor exp(slope)."""
        return float(np.exp(self.slope))


def distances_to_optimum(xs, x_star: np.ndarray) -> np.ndarray:
    """||x^t - 1 (x) x*|| for each stacked iterate."""
    x_star = np.asarray(x_star, dtype=float)
    return np.array([np.linalg.norm(np.asarray(X) - x_star) for X in xs])


def linear_rate_fit(distances, floor: float = DISTANCE_FLOOR, min_points: int = MIN_POINTS) -> RateFit:
    d = np.asarray(distances, dtype=float)
    t = np.arange(d.size, dtype=float)
    keep = d > floor
    if int(keep.sum()) < min_points:
        raise InsufficientDataError(f"{int(keep.sum())} points above {floor:g}, need {min_points}")
    t, logd = t[keep], np.log(d[keep])
    if np.ptp(logd) == 0.0:
        logger.debug("rate fit on a constant trace of %s points", logd.size)
        return RateFit(slope=0.0, r_squared=0.0, points=int(logd.size), flat=True)
    slope, intercept = np.polyfit(t, logd, 1)
    residual = logd - (slope * t + intercept)
    ss_tot = float(np.sum((logd - logd.mean()) ** 2))
    r_squared = 1.0 - float(np.sum(residual**2)) / ss_tot
    return RateFit(slope=float(slope), r_squared=r_squared, points=int(logd.size))
