"""Deterministic randomness primitives shared by every stochastic step.

All random choices in the package — train/test splits, fold dealing,
permutation shuffles, cell flips, Gaussian noise — flow through a single
generator so that identical seeds reproduce identical results bit-for-bit,
on any platform, and so the draw sequence can be re-implemented exactly in
another language from this docstring alone.

Generator: **SplitMix64** (the 64-bit-state mixer from Steele, Lea & Flood's
splittable-PRNG work; also the seeding generator of the xoshiro family).
State update and output finalization::

    state  = (state + 0x9E3779B97F4A7C15)  mod 2^64
    z = state
    z = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9   mod 2^64
    z = (z XOR (z >> 27)) * 0x94D049BB133111EB   mod 2^64
    output = z XOR (z >> 31)

Derived conventions (all documented here, relied upon by tests):

* ``uniform()``  = ``next_u64() >> 11`` times ``2**-53`` — float in [0, 1).
* ``below(n)``   = ``next_u64() % n`` — the plain modulo method. The modulo
  bias is < n/2^64, irrelevant at our ranges (n ≤ a few thousand) and the
  simplest to mirror elsewhere.
* ``shuffle``    = Fisher–Yates from the top: for i = len-1 .. 1 swap
  (i, below(i+1)).
* ``sample_indices(n, m)`` = partial Fisher–Yates over 0..n-1: for
  i = 0..m-1 swap (i, i + below(n - i)); the first m slots are the sample.
* Gaussians      = Box–Muller on pairs of uniforms with u1 = 1 - uniform()
  (so u1 ∈ (0,1], keeping log(u1) finite): z0 = r·cos(2πu2),
  z1 = r·sin(2πu2), r = sqrt(-2·ln u1). ``normal()`` yields z0 then the
  cached z1.
* Derived streams: ``stream(seed, tag)`` seeds a fresh generator with
  ``seed XOR ((tag + 1) * 0x9E3779B97F4A7C15  mod 2^64)`` so that distinct
  purposes (per-class shuffles, per-feature permutations, per-condition
  noise) consume independent, individually reproducible sequences.

Because the state advance is a plain counter increment, the k-th raw output
equals ``finalize(seed + k * GOLDEN)``; the vectorized helpers exploit this
closed form with numpy uint64 arithmetic and are bit-identical to the
scalar path (tested).
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi


def _finalize(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 generator with the derived draws documented above."""

    __slots__ = ("_state", "_spare")

    def __init__(self, seed: int):
        self._state = seed & MASK64
        self._spare: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return _finalize(self._state)

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random mantissa bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def below(self, n: int) -> int:
        """Integer in [0, n) via the documented modulo method."""
        if n <= 0:
            raise ValueError("below() needs n > 0")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher–Yates shuffle (top-down)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_indices(self, n: int, m: int) -> list[int]:
        """First m slots of a partial Fisher–Yates over range(n)."""
        if not 0 <= m <= n:
            raise ValueError("need 0 <= m <= n")
        pool = list(range(n))
        for i in range(m):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:m]

    def normal(self) -> float:
        """Standard Gaussian via Box–Muller (z0 then cached z1)."""
        if self._spare is not None:
            z = self._spare
            self._spare = None
            return z
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(_TWO_PI * u2)
        return r * math.cos(_TWO_PI * u2)

    # -- vectorized counterparts (bit-identical to the scalar draws) --------

    def _next_u64_array(self, count: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            steps = np.arange(1, count + 1, dtype=np.uint64)
            z = np.uint64(self._state) + steps * np.uint64(GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + count * GOLDEN) & MASK64
        return z

    def uniform_array(self, count: int) -> np.ndarray:
        return (self._next_u64_array(count) >> np.uint64(11)) * _INV_2_53

    def normal_array(self, count: int) -> np.ndarray:
        """`count` Gaussians in the same order normal() would yield them."""
        if count == 0:
            return np.empty(0)
        pairs = (count + 1) // 2
        u = self.uniform_array(2 * pairs)
        u1 = 1.0 - u[0::2]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(_TWO_PI * u2)
        out[1::2] = r * np.sin(_TWO_PI * u2)
        return out[:count]


def stream(seed: int, tag: int) -> SplitMix64:
    """Independent generator for (seed, purpose-tag); see module docstring."""
    return SplitMix64((seed ^ ((tag + 1) * GOLDEN)) & MASK64)
