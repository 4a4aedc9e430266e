"""Portable seeded random numbers for the noise transform.

SplitMix64 (Steele, Lea & Flood's published constants) drives a Box-Muller
normal sampler.  Both pieces are specified exactly so any implementation
seeded identically reproduces the same noise field bit for bit; that is the
reason we do not reach for numpy's own (ziggurat-based) normal generator
here.
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0 ** -53


class SplitMix64:
    """Counter-based SplitMix64 stream over a 64-bit seed."""

    def __init__(self, seed):
        self._seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def next_raw(self, count):
        """Return the next ``count`` raw 64-bit outputs of the stream."""
        idx = np.arange(self._counter + 1, self._counter + count + 1, dtype=np.uint64)
        self._counter += count
        with np.errstate(over="ignore"):
            z = self._seed + idx * _GAMMA
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            return z ^ (z >> np.uint64(31))

    def uniforms(self, count):
        """Doubles in [0, 1) with 53 random mantissa bits."""
        return (self.next_raw(count) >> np.uint64(11)).astype(np.float64) * _U53

    def normals(self, count):
        """Standard normal samples via the Box-Muller transform."""
        pairs = (count + 1) // 2
        # u1 in (0, 1] so the log never sees zero; u2 in [0, 1).
        u1 = ((self.next_raw(pairs) >> np.uint64(11)).astype(np.float64) + 1.0) * _U53
        u2 = (self.next_raw(pairs) >> np.uint64(11)).astype(np.float64) * _U53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]
