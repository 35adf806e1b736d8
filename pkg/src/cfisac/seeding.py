"""Deterministic per-trial seed derivation.

``seed_derivation(master, index) = mix(mix(master) XOR index)`` where ``mix``
is the SplitMix64 finalizer on unsigned 64-bit integers. The finalizer is a
bijection of 64-bit words, so for a fixed master distinct indices can never
collide. Everything is integer arithmetic modulo 2**64, so the result does not
depend on byte order.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def seed_derivation(master: int, index: int) -> int:
    """64-bit stream seed for trial ``index`` under ``master``."""
    return splitmix64(splitmix64(int(master) & MASK64) ^ (int(index) & MASK64))


def derive(master: int, *path: int) -> int:
    """Apply :func:`seed_derivation` along a path of indices."""
    s = int(master) & MASK64
    for i in path:
        s = seed_derivation(s, i)
    return s
