"""
Master-seed splitting.

One master seed expands through numpy's SeedSequence into three independent child streams:
  data       dataset generation (shared by every algorithm of a cell)
  topology   random geometric point sampling
  noise      communication noise, further split per algorithm
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STREAMS = ("data", "topology", "noise")


@dataclass(frozen=True)
class SeedStreams:
    master: int
    data: int
    topology: int
    noise: int

    def noise_for(self, index: int) -> int:
        """Independent noise stream for the index-th algorithm of a cell."""
        child = np.random.SeedSequence(self.noise).spawn(index + 1)[index]
        return int(child.generate_state(1, dtype=np.uint64)[0])


def split_seed(master: int) -> SeedStreams:
    children = np.random.SeedSequence(master).spawn(len(STREAMS))
    data, topology, noise = (int(c.generate_state(1, dtype=np.uint64)[0]) for c in children)
    return SeedStreams(master=master, data=data, topology=topology, noise=noise)
