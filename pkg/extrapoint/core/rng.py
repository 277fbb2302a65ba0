"""
Counter-based random streams.

Streams are Philox generators keyed by a master seed and a spawn key, so the
stream of replication ``r`` never depends on how many replications run or in
which order they execute.
"""

import numpy as np

# Spawn-key namespaces keep unrelated consumers of one master seed apart.
STREAM_PROBLEM = 0
STREAM_REPLICATION = 1
STREAM_PROBE = 2


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """
    Build a Philox generator for ``seed`` and spawn key ``key``.

    Args:
        seed: Master seed (nonnegative)
        key: Integer path identifying the consumer, e.g. (STREAM_REPLICATION, r)

    Returns:
        Independent numpy Generator
    """
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(sequence))


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Stream for replication ``replication`` of a run seeded with ``seed``."""
    return make_rng(seed, STREAM_REPLICATION, replication)


def problem_rng(seed: int) -> np.random.Generator:
    """Stream used to generate problem instances."""
    return make_rng(seed, STREAM_PROBLEM)


def probe_rng(seed: int) -> np.random.Generator:
    """Stream used by empirical contract checks."""
    return make_rng(seed, STREAM_PROBE)
