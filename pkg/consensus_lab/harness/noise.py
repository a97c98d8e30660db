"""
Communication noise: zero-mean Gaussian perturbation of exchanged messages.

DP2G perturbs the disagreement residual each agent processes and the dual vector it
broadcasts; baselines perturb their neighbor-averaged messages.
"""
from __future__ import annotations

import numpy as np

from consensus_lab.core.errors import ParameterError


def inject_noise(message: np.ndarray, comm_sigma: float, rng: np.random.Generator) -> np.ndarray:
    if comm_sigma < 0:
        raise ParameterError("comm_sigma must be >= 0")
    message = np.asarray(message, dtype=float)
    if comm_sigma == 0:
        return message
    return message + comm_sigma * rng.standard_normal(message.shape)


class NoiseChannel:
    """Callable message perturbation bound to one rng stream."""

    def __init__(self, comm_sigma: float, seed=None):
        if comm_sigma < 0:
            raise ParameterError("comm_sigma must be >= 0")
        self.comm_sigma = float(comm_sigma)
        self.rng = np.random.default_rng(seed)

    def __call__(self, message: np.ndarray) -> np.ndarray:
        return inject_noise(message, self.comm_sigma, self.rng)


def channel_for(comm_sigma: float, seed=None) -> NoiseChannel | None:
    """None when the links are noise-free, so solvers skip the perturbation entirely."""
    return NoiseChannel(comm_sigma, seed) if comm_sigma > 0 else None
