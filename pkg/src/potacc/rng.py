"""Deterministic xorshift64 generator for benchmark stimuli.

The update is Marsaglia's 64-bit xorshift triple (13, 7, 17):

    x ^= x << 13;  x &= 2**64 - 1
    x ^= x >> 7
    x ^= x << 17;  x &= 2**64 - 1

One value is drawn per step; int8 samples take the low byte (two's
complement), 4-bit codes the low nibble. The sequence is fully defined by
the seed, so any implementation of the same recurrence reproduces the
stimuli byte for byte. A zero seed is replaced by a fixed odd constant
(the generator has no zero state).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_ZERO_SEED_SUBSTITUTE = 0x9E3779B97F4A7C15


class Xorshift64:
    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64
        if self.state == 0:
            self.state = _ZERO_SEED_SUBSTITUTE

    def next_u64(self) -> int:
        x = self.state
        x ^= (x << 13) & _MASK64
        x ^= x >> 7
        x ^= (x << 17) & _MASK64
        self.state = x
        return x

    def int8(self) -> int:
        b = self.next_u64() & 0xFF
        return b - 256 if b >= 128 else b

    def nibble(self) -> int:
        return self.next_u64() & 0xF

    def int8_array(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        return np.array([self.int8() for _ in range(n)], dtype=np.int8).reshape(shape)

    def nibble_array(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        return np.array([self.nibble() for _ in range(n)], dtype=np.uint8).reshape(shape)
