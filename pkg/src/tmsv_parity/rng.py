"""Counter-based pseudo-random numbers for reproducible Monte Carlo.

Everything here is a SplitMix64 stream: output ``j`` of the stream with seed
``s`` is ``mix64(s + j * GOLDEN_GAMMA)`` (64-bit wraparound arithmetic).
Because each draw is a pure function of (seed, counter), the same numbers can
be produced one at a time or as numpy blocks, in any order and from any
worker, which is what makes ensemble output independent of thread count.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

_GAMMA_U64 = np.uint64(GOLDEN_GAMMA)
_MUL1_U64 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2_U64 = np.uint64(0x94D049BB133111EB)
_DOUBLE_SCALE = float(2.0**-53)


def mix64(x: int) -> int:
    """Bijective 64-bit finalizer (the SplitMix64 output mix)."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`mix64`; input is converted to uint64 (wrapping)."""
    z = x.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _MUL1_U64
    z ^= z >> np.uint64(27)
    z *= _MUL2_U64
    z ^= z >> np.uint64(31)
    return z


def _to_unit(bits: np.ndarray) -> np.ndarray:
    # Top 53 bits -> double in [0, 1); matches the scalar path bit for bit.
    return (bits >> np.uint64(11)).astype(np.float64) * _DOUBLE_SCALE


def derive_seed(master_seed: int, index: int) -> int:
    """Child seed for a record or scan cell.

    Injective in ``index`` for any fixed master seed (the counter map is a
    bijection mod 2**64 and mix64 is a bijection), so derived streams never
    alias regardless of how work is partitioned.
    """
    if index < 0:
        raise ValueError("index must be nonnegative")
    return mix64((master_seed + (index + 1) * GOLDEN_GAMMA) & MASK64)


def derive_seeds(master_seed: int, indices: np.ndarray) -> np.ndarray:
    """Vectorised :func:`derive_seed` for an array of record indices."""
    counters = np.uint64(master_seed & MASK64) + (
        indices.astype(np.uint64) + np.uint64(1)
    ) * _GAMMA_U64
    return mix64_array(counters)


def stream_uniforms(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Outputs ``start+1 .. start+count`` of the stream, as doubles in [0, 1)."""
    ctr = np.uint64(seed & MASK64) + (
        np.arange(start + 1, start + count + 1, dtype=np.uint64) * _GAMMA_U64
    )
    return _to_unit(mix64_array(ctr))


def first_uniforms(seeds: np.ndarray) -> np.ndarray:
    """First uniform of each stream in ``seeds`` (one draw per record)."""
    return _to_unit(mix64_array(seeds.astype(np.uint64) + _GAMMA_U64))


class SplitMix64:
    """Scalar stream view, for code that draws one value at a time."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & MASK64
        return mix64(self._state)

    def next_unit(self) -> float:
        return (self.next_uint64() >> 11) * _DOUBLE_SCALE
