"""Counter-based random substreams for reproducible simulation.

Every stochastic decision in a run is drawn from a substream addressed by
(root seed, trial index, hop index, domain tag).  Substream output depends
only on that address, never on execution order, so serial runs and any
parallel partition of trials produce bit-identical results.

The generator is the splitmix64 output function applied to a per-substream
state plus a word counter (the scheme used by Java's SplittableRandom).
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit word."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_state(seed: int, *words: int) -> int:
    """Fold integer address words into a 64-bit substream state."""
    s = seed & _MASK64
    for w in words:
        s = _mix((s + _GOLDEN) ^ (w & _MASK64))
    return s


def derive_seed(seed: int, *words: int) -> int:
    """Derive a child seed (non-negative, < 2**63) from an address."""
    return derive_state(seed, *words) >> 1


class Substream:
    """One independent random stream, identified by its derivation words.

    Stream word i is mix(state + (i+1)*golden); consuming methods advance
    the word counter deterministically.
    """

    __slots__ = ("_state", "_count")

    def __init__(self, seed: int, *words: int) -> None:
        self._state = derive_state(seed, *words)
        self._count = 0

    def next_u64(self) -> int:
        self._count += 1
        return _mix((self._state + self._count * _GOLDEN) & _MASK64)

    def uniform(self) -> float:
        """Next double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 1.1102230246251565e-16  # 2**-53

    def below(self, bound: int) -> int:
        """Next integer in [0, bound). Multiply-shift scaling of one word."""
        return (self.next_u64() * bound) >> 64

    def binomial(self, n: int, p: float) -> int:
        """Binomial(n, p) draw by CDF inversion.

        Consumes exactly one uniform per <=1024-trial chunk; chunking keeps
        (1-p)^n above the double underflow threshold for any n.
        """
        if n <= 0 or p <= 0.0:
            return 0
        if p >= 1.0:
            return n
        total = 0
        remaining = n
        while remaining > 0:
            m = min(remaining, 1024)
            total += self._binv(m, p)
            remaining -= m
        return total

    def _binv(self, n: int, p: float) -> int:
        u = self.uniform()
        q = 1.0 - p
        pmf = math.exp(n * math.log1p(-p))  # (1-p)^n without pow-loss
        odds = p / q
        cdf = pmf
        k = 0
        while u > cdf and k < n:
            k += 1
            pmf *= odds * (n - k + 1) / k
            cdf += pmf
        return k

    def distinct_below(self, bound: int, count: int) -> list[int]:
        """count distinct integers in [0, bound) (Floyd's sampling)."""
        if count >= bound:
            return list(range(bound))
        chosen: set[int] = set()
        for i in range(bound - count, bound):
            j = self.below(i + 1)
            chosen.add(i if j in chosen else j)
        return sorted(chosen)

    def gauss(self) -> float:
        """Standard normal via Box-Muller (cosine branch)."""
        u1 = self.uniform()
        while u1 <= 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
