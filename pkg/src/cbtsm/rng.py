"""Deterministic random streams for scenario generation.

All randomness is produced by the counter-based Philox-4x64-10 generator,
keyed per (root seed, stream label) so that every array gets an independent,
individually reproducible stream.  Keys are derived with SplitMix64 applied to
the root seed XOR an FNV-1a hash of the label, which keeps the whole scheme
implementable from scratch in any language:

* FNV-1a 64-bit: offset 14695981039346656037, prime 1099511628211.
* SplitMix64: increment 0x9E3779B97F4A7C15, mixers 0xBF58476D1CE4E5B9 and
  0x94D049BB133111EB, final xorshift 31.
* Uniform doubles: u = ((word >> 11) + 0.5) * 2**-53, strictly inside (0, 1).
* Normal draws: inverse CDF (scipy.special.ndtri) applied to u.
* Gumbel EV(0,1) draws: -log(-log(u)).

Raw 64-bit words are consumed from the Philox keystream in little-endian
order, so a fixed (seed, label, count) always yields the same bits on every
platform.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtri

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(label: str) -> int:
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state; returns (new_state, output word)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def derive_key(seed: int, label: str) -> tuple[int, int]:
    """128-bit Philox key for a named stream under a 64-bit root seed."""
    state = (int(seed) & _MASK64) ^ fnv1a64(label)
    state, k0 = splitmix64(state)
    _, k1 = splitmix64(state)
    return k0, k1


def stream(seed: int, label: str) -> np.random.Generator:
    key = derive_key(seed, label)
    return np.random.Generator(np.random.Philox(key=key[0] | (key[1] << 64)))


def raw_words(seed: int, label: str, count: int) -> np.ndarray:
    gen = stream(seed, label)
    return np.frombuffer(gen.bytes(8 * count), dtype="<u8").copy()


def uniform_open(seed: int, label: str, count: int) -> np.ndarray:
    """Uniform doubles strictly inside (0, 1)."""
    words = raw_words(seed, label, count)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normal(seed: int, label: str, count: int, mean: float, sd: float) -> np.ndarray:
    if sd < 0:
        raise ValueError(f"negative standard deviation: {sd}")
    return mean + sd * ndtri(uniform_open(seed, label, count))


def gumbel_standard(seed: int, label: str, count: int) -> np.ndarray:
    return gumbel_inverse_cdf(uniform_open(seed, label, count))


def gumbel_inverse_cdf(u):
    """Inverse of the EV(0,1) CDF exp(-exp(-x)); accepts scalars or arrays."""
    if np.isscalar(u):
        return -math.log(-math.log(u))
    return -np.log(-np.log(np.asarray(u, dtype=np.float64)))


def permutation(seed: int, label: str, n: int) -> np.ndarray:
    """Fisher-Yates permutation of range(n) driven by the named stream."""
    words = raw_words(seed, label, max(n - 1, 0))
    out = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(words[n - 1 - i] % np.uint64(i + 1))
        out[i], out[j] = out[j], out[i]
    return out
