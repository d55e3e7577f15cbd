"""Deterministic random-stream derivation.

Every consumer of randomness derives its own generator from the master seed
plus a structured key (trajectory, step, voxel, phase).  Distinct keys give
statistically independent streams, and a fixed key always reproduces the
same stream, so ensemble results are bit-identical regardless of how work
is scheduled across workers.
"""

from __future__ import annotations

import numpy as np

PHASES = {
    "nsm": 0,
    "diffusion": 1,
    "reaction": 2,
    "tables": 3,
    "driver": 4,
    "window": 5,
}


def substream(
    master_seed: int,
    trajectory: int = 0,
    step: int = 0,
    voxel: int = 0,
    phase: str = "driver",
) -> np.random.Generator:
    """Derive an independent generator for one (trajectory, step, voxel, phase)."""
    if master_seed < 0:
        raise ValueError("master seed must be >= 0")
    key = (int(trajectory), int(step), int(voxel), PHASES[phase])
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def exponential(rng: np.random.Generator, rate: float) -> float:
    """Exponential waiting time via inverse CDF on the uniform stream."""
    if rate <= 0.0:
        return np.inf
    # 1 - u lies in (0, 1], so the log never sees zero.
    return -np.log1p(-rng.random()) / rate
