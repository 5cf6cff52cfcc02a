"""Deterministic random-stream derivation.

Every stochastic routine in this package accepts a ``seed`` argument and
derives child streams from it with ``numpy.random.SeedSequence``.  Work
units (simulation replications, resamples, individual imputations) each get
their own child sequence keyed by index, so results do not depend on
execution order and are reproducible whether work runs serially or across
processes.
"""

from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.SeedSequence"


def seed_sequence(seed) -> np.random.SeedSequence:
    """Normalize an int or SeedSequence into a SeedSequence.

    Generators are deliberately not accepted: child derivation from a
    stateful generator would depend on how much of the stream was already
    consumed, breaking the schedule-independence guarantee.
    """
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (int, np.integer)):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        return np.random.SeedSequence(int(seed))
    raise TypeError(f"seed must be an int or SeedSequence, got {type(seed).__name__}")


def child(seed, *key: int) -> np.random.SeedSequence:
    """Derive the child sequence of ``seed`` at a fixed spawn key.

    ``child(s, i)`` equals the i-th element of ``seed_sequence(s).spawn(n)``
    for any n > i, so indexed derivation and bulk spawning agree.
    """
    root = seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=root.entropy,
        spawn_key=root.spawn_key + tuple(int(k) for k in key),
    )


def generator(seed) -> np.random.Generator:
    """Build the PCG64 generator for a seed or seed sequence."""
    return np.random.default_rng(seed_sequence(seed))
