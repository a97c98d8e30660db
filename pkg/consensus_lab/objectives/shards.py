"""
Dataset export / import.

Layout of a dataset directory:
  manifest.json       kind, n, d_i per agent, m, seed, regularizers, loss scale, ground truth
  agent_000.npz ...   one shard per agent with arrays A (d_i x m) and b (d_i)

Arrays are stored as float64, so a round trip is bit-exact.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from consensus_lab.core.errors import OutputError, ParameterError
from consensus_lab.objectives.problem import GroundTruth, Problem, ProblemKind, Shard

logger = logging.getLogger("consensus_lab.objectives.shards")

MANIFEST_NAME = "manifest.json"


class DatasetManifest(BaseModel):
    kind: ProblemKind
    n: int
    d: list[int]
    m: int
    seed: int | None = None
    lam: float = 0.0
    lam1: float = 0.0
    lam2: float = 0.0
    scale: float = 1.0
    x_true: list[float] | None = None
    support: list[int] | None = None
    noise_sigma: float | None = None


def _shard_name(i: int) -> str:
    return f"agent_{i:03d}.npz"


def export_dataset(problem: Problem, path, truth: GroundTruth | None = None, seed: int | None = None) -> Path:
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        manifest = DatasetManifest(
            kind=problem.kind,
            n=problem.n,
            d=[shard.d for shard in problem.shards],
            m=problem.m,
            seed=seed,
            lam=problem.lam,
            lam1=problem.lam1,
            lam2=problem.lam2,
            scale=problem.scale,
            x_true=truth.x_true.tolist() if truth is not None else None,
            support=list(truth.support) if truth is not None else None,
            noise_sigma=truth.noise_sigma if truth is not None else None,
        )
        (root / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2))
        for i, shard in enumerate(problem.shards):
            np.savez(root / _shard_name(i), A=shard.A, b=shard.b)
    except OSError as exc:
        raise OutputError(f"cannot write dataset to {root}: {exc}") from exc
    logger.info("exported %s dataset with %s shards to %s", problem.kind, problem.n, root)
    return root


def import_dataset(path) -> tuple[Problem, GroundTruth | None]:
    root = Path(path)
    try:
        manifest = DatasetManifest.model_validate_json((root / MANIFEST_NAME).read_text())
    except OSError as exc:
        raise OutputError(f"cannot read dataset manifest in {root}: {exc}") from exc
    shards = []
    for i in range(manifest.n):
        with np.load(root / _shard_name(i)) as data:
            A, b = data["A"], data["b"]
        if A.shape != (manifest.d[i], manifest.m):
            raise ParameterError(f"shard {i} has shape {A.shape}, manifest says {(manifest.d[i], manifest.m)}")
        shards.append(Shard(A, b))
    problem = Problem(
        kind=manifest.kind,
        shards=tuple(shards),
        m=manifest.m,
        lam=manifest.lam,
        lam1=manifest.lam1,
        lam2=manifest.lam2,
        scale=manifest.scale,
    )
    truth = None
    if manifest.x_true is not None:
        truth = GroundTruth(
            x_true=np.asarray(manifest.x_true, dtype=float),
            support=tuple(manifest.support or ()),
            noise_sigma=float(manifest.noise_sigma or 0.0),
        )
    return problem, truth
