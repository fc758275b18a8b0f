"""Seeded, fully specified PRNG primitives.

Everything downstream that needs randomness (split shuffling, pixel
sampling, synthetic scenes) draws from xoshiro256** seeded via splitmix64,
so any two runs with the same seed produce bit-identical results on any
platform. Gaussian noise uses Box-Muller on fixed-order uniform draws for
the same reason; library RNGs are deliberately avoided.

Conventions, pinned here once:

* splitmix64: state advances by the golden-gamma constant, output is the
  murmur-style finalizer of the advanced state.
* xoshiro256**: seeded with four consecutive splitmix64 outputs.
* ``next_float`` = top 53 bits / 2^53, uniform on [0, 1).
* ``randbelow(n)`` = ``next_u64() % n`` (modulo bias is irrelevant at the
  n << 2^64 sizes used here).
* Fisher-Yates runs from the last index down, ``j = randbelow(i + 1)``.
* Box-Muller pair i consumes uniform draws (2i, 2i+1); the first is mapped
  to (0, 1] as ``1 - u`` so the log never sees zero.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 2.0 ** -53
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def splitmix64_mix(z: int) -> int:
    """The splitmix64 output finalizer, usable as a standalone 64-bit mixer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Minimal splitmix64 stream, used to seed xoshiro state."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return splitmix64_mix(self._state)


def fnv1a64(data: bytes) -> int:
    """FNV-1a hash of a byte string; stable way to fold ids into seeds."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def derive_stream_seed(seed: int, *components: int | str) -> int:
    """Fold extra key components (ints or strings) into a base seed.

    Each component is hashed (strings via FNV-1a of their UTF-8 bytes) and
    chained through the splitmix64 finalizer, so substreams keyed by
    (seed, entry id, class) and the like never collide by construction
    accident.
    """
    acc = splitmix64_mix(seed)
    for comp in components:
        if isinstance(comp, str):
            comp = fnv1a64(comp.encode("utf-8"))
        acc = splitmix64_mix(acc ^ (comp & _MASK64))
    return acc


class Xoshiro256StarStar:
    """xoshiro256** with splitmix64 seeding (Blackman & Vigna's reference
    recurrence, ported verbatim)."""

    def __init__(self, seed: int):
        sm = SplitMix64(seed)
        self._s0 = sm.next_u64()
        self._s1 = sm.next_u64()
        self._s2 = sm.next_u64()
        self._s3 = sm.next_u64()

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        x = (s1 * 5) & _MASK64
        result = (((x << 7) | (x >> 57)) & _MASK64) * 9 & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def next_float(self) -> float:
        """Uniform double on [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def randbelow(self, n: int) -> int:
        """Uniform-ish integer in [0, n)."""
        if n <= 0:
            raise ValueError("randbelow() requires n >= 1")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def fill_u64(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        for i in range(n):
            out[i] = self.next_u64()
        return out

    def uniforms(self, n: int) -> np.ndarray:
        """n sequential [0, 1) doubles as an array."""
        return (self.fill_u64(n) >> np.uint64(11)) * np.float64(_INV_2_53)

    def gaussians(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller on sequential uniform pairs."""
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1]: log is always finite
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        z = np.empty(2 * pairs, dtype=np.float64)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n]
