"""Seeded, portable random number generation.

Every stochastic component in this package (data generators, weight
initialization, epoch shuffling, fault injection) draws from the counter-based
generator below instead of a global RNG, so that each output stream is a pure
function of an integer seed.

Algorithm: SplitMix64 (Steele, Lea & Flood 2014), used in counter mode.
The k-th raw draw for seed ``s`` is ``mix64(s + (k+1) * GAMMA)`` with

    GAMMA = 0x9E3779B97F4A7C15
    mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
              z ^= z >> 27; z *= 0x94D049BB133111EB;
              z ^= z >> 31

All arithmetic is modulo 2**64. Counter mode makes the stream vectorizable
and position-addressable; the uint64 layer is bit-identical on any platform.
Uniform doubles take the top 53 bits; normal variates use the explicit
Box-Muller transform (so the real-valued layer depends only on IEEE-754
libm evaluations of log/sqrt/cos/sin, stable in practice across platforms).
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def _mix64(z: np.ndarray) -> np.ndarray:
    # modulo-2**64 wraparound is the algorithm, not an accident
    with np.errstate(over="ignore"):
        z = z ^ (z >> np.uint64(30))
        z = z * _MIX1
        z = z ^ (z >> np.uint64(27))
        z = z * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, tag: int) -> int:
    """Deterministic child seed for an independent substream.

    Children for distinct tags are decorrelated by mixing the tag through
    the same finalizer before xoring it into the parent seed.
    """
    s = np.uint64(seed & _U64_MASK)
    with np.errstate(over="ignore"):
        t = _mix64(np.uint64(tag & _U64_MASK) + _GAMMA)
    return int(_mix64(s ^ t))


class PortableRng:
    """Sequential interface over the counter-based SplitMix64 stream."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & _U64_MASK)
        self._counter = 0

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw uint64 draws."""
        if n < 0:
            raise ValueError("n must be non-negative")
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            keys = self._seed + idx * _GAMMA
        return _mix64(keys)

    def random(self, n: int) -> np.ndarray:
        """Uniform float64 in [0, 1)."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.random(n)

    def normal(self, mean: float, std: float, n: int) -> np.ndarray:
        """Gaussian draws via Box-Muller on consecutive uniform pairs."""
        m = (n + 1) // 2
        # u1 in (0, 1] keeps log finite; u2 in [0, 1)
        u1 = ((self.raw(m) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (self.raw(m) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return mean + std * z

    def permutation(self, n: int) -> np.ndarray:
        """Permutation of range(n) by stable argsort over raw keys."""
        return np.argsort(self.raw(n), kind="stable")

    def integer_below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = int(self.raw(1)[0])
            if x < limit:
                return x % bound

    def choice_without_replacement(self, n: int, k: int) -> np.ndarray:
        """First ``k`` entries of a fresh permutation of range(n)."""
        if k > n:
            raise ValueError("cannot draw more items than available")
        return self.permutation(n)[:k]
