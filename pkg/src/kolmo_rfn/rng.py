"""Deterministic random streams.

Every random draw in this package comes from a Philox counter-based bit
generator seeded through :class:`numpy.random.SeedSequence` with a spawn
key.  A pair ``(seed, stream ids...)`` therefore always denotes the same
stream, no matter what other streams were consumed before it or on which
thread.  Components that need several independent sources (normals and
chi-squares of a t sampler, inputs and labels of a dataset, per-row Monte
Carlo substreams) reserve one fixed stream id each, which also makes
prefix reuse possible: drawing more variates from a stream never changes
the ones already drawn.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "derive_seed"]

_MASK64 = 0xFFFFFFFFFFFFFFFF


def substream(seed: int, *ids: int) -> np.random.Generator:
    """Return the generator for stream ``ids`` under master ``seed``."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(int(i) & _MASK64 for i in ids),
    )
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *ids: int) -> int:
    """Derive a child integer seed from ``(seed, ids)``.

    Used where a component takes a plain seed of its own (datasets, SGD)
    but must stay isolated from its siblings under one master seed.
    """

    ss = np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(int(i) & _MASK64 for i in ids),
    )
    return int(ss.generate_state(1, np.uint64)[0])
