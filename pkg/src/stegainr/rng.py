"""Keyed deterministic random stream (SplitMix64-seeded xoshiro256**).

The stream is defined bit-exactly so that two parties holding the same key
derive the same numbers on any platform.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

MASK64 = (1 << 64) - 1


def splitmix64_seed(key: int) -> np.ndarray:
    """Expand a 64-bit key into the four-word xoshiro256** state."""
    s = int(key) & MASK64
    words = []
    for _ in range(4):
        s = (s + 0x9E3779B97F4A7C15) & MASK64
        z = s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        words.append(z ^ (z >> 31))
    return np.array(words, dtype=np.uint64)


@njit(cache=True)
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True)
def _fill_u64(state, out):
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
    for i in range(out.shape[0]):
        out[i] = _rotl(s1 * uint64(5), 7) * uint64(9)
        t = s1 << uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
    state[0], state[1], state[2], state[3] = s0, s1, s2, s3


class KeyStream:
    """Infinite stream of 64-bit words and [0, 1) doubles derived from a key.

    >>> a, b = KeyStream(7), KeyStream(7)
    >>> bool((a.next_u64(5) == b.next_u64(5)).all())
    True
    """

    def __init__(self, key: int):
        if not 0 <= int(key) <= MASK64:
            raise ValueError(f"key must be an unsigned 64-bit integer, got {key}")
        self.key = int(key)
        self._state = splitmix64_seed(self.key)

    def next_u64(self, n: int) -> np.ndarray:
        out = np.empty(int(n), dtype=np.uint64)
        _fill_u64(self._state, out)
        return out

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1) computed as (next64 >> 11) * 2**-53."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform_range(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.uniform(n)
