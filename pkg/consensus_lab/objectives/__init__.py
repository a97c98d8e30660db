from consensus_lab.objectives.generate import generate_dataset, scale_to_unit_lipschitz
from consensus_lab.objectives.problem import (
    GroundTruth,
    Problem,
    Shard,
    lipschitz_constants,
    local_prox,
    objective_value,
    smooth_gradient,
)

__all__ = [
    "GroundTruth",
    "Problem",
    "Shard",
    "generate_dataset",
    "lipschitz_constants",
    "local_prox",
    "objective_value",
    "scale_to_unit_lipschitz",
    "smooth_gradient",
]
