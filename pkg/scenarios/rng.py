"""
rng.py — seeded random streams.

Every trial gets its own generator derived from (master seed, trial index):

    SeedSequence(entropy=seed, spawn_key=(trial,))

That is exactly the `trial`-th child of SeedSequence(seed).spawn(...), so a
trial draws the same numbers no matter which worker runs it or in what order.
"""

from __future__ import annotations

import numpy as np

from core.errors import ParameterError

RandomSource = int | np.random.Generator


def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ParameterError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def make_rng(seed: int) -> np.random.Generator:
    """Generator for a one-off draw (PCG64 under numpy's default_rng)."""
    return np.random.default_rng(np.random.SeedSequence(_check_seed(seed)))


def trial_stream(seed: int, trial: int) -> np.random.Generator:
    """Generator for trial number `trial` (0-based) of a run seeded with `seed`."""
    if trial < 0:
        raise ParameterError(f"trial index must be >= 0, got {trial}")
    sequence = np.random.SeedSequence(entropy=_check_seed(seed), spawn_key=(int(trial),))
    return np.random.default_rng(sequence)


def as_generator(source: RandomSource) -> np.random.Generator:
    """Samplers accept either a seed or a live generator."""
    if isinstance(source, np.random.Generator):
        return source
    return make_rng(source)
