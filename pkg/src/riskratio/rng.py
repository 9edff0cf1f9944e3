"""Reproducible, splittable random number streams.

All stochastic code in the package draws from Philox counter-based
generators keyed by (base_seed, stream_index).  The 128-bit Philox key is
``base_seed`` (low 64 bits) with the stream index in the high 64 bits, so
distinct indices give non-overlapping streams by construction and results
never depend on execution order or thread count.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(base_seed: int, index: int = 0) -> np.random.Generator:
    """Generator for stream ``index`` of the family keyed by ``base_seed``."""
    if index < 0:
        raise ValueError("stream index must be non-negative")
    key = (int(base_seed) & _MASK64) | ((int(index) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))
