"""Seed derivation.

Every random stream is derived from the single top-level seed by folding a path
of small integers through the SplitMix64 finalizer::

    s = root mod 2**64
    for p in path:
        s = mix64(s + 0x9E3779B97F4A7C15 * (p + 1))

``mix64`` is the SplitMix64 output function. Stream paths used by the pipeline
start with one of the constants below, followed by appliance index and
repetition number where relevant.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

SYNTH = 0
SPLIT = 1
INIT = 2
SHUFFLE = 3


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(root: int, *path: int) -> int:
    s = int(root) & MASK64
    for p in path:
        s = mix64(s + GOLDEN * (int(p) + 1))
    return s
