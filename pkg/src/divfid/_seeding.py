"""Counter-based random streams.

Every random quantity is drawn from a generator keyed by
``(master_seed, stream_tag, unit_index)``, so any work unit can be
regenerated in isolation and execution order never changes results.
"""
from __future__ import annotations

import numpy as np

# stream tags; never renumber, results depend on them
CHANNEL = 1
SOURCE = 2
NOISE = 3
CLOUD = 4
TRANSMIT = 5
DISTORTION = 6

_MASK64 = (1 << 64) - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed > _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(master_seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Independent generator for one ``(seed, tag, index)`` triple."""
    ss = np.random.SeedSequence([check_seed(master_seed), int(tag), int(index)])
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly symmetric complex Gaussian with unit variance."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)
