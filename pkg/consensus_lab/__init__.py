"""consensus-lab: decentralized consensus optimization with l1 penalty continuation."""

__version__ = "0.1.0"
