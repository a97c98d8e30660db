from consensus_lab.network.mixing import MixingMatrix, SpectralReport, metropolis_weights, validate_mixing
from consensus_lab.network.topology import Graph, TopologySpec, build_topology

__all__ = [
    "Graph",
    "MixingMatrix",
    "SpectralReport",
    "TopologySpec",
    "build_topology",
    "metropolis_weights",
    "validate_mixing",
]
