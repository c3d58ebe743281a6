"""Segmented prime generation and the block schedule in both regimes.

Blocks are the half-open intervals [x_j, x_{j+1}) with x_0 = 2 and

    unconditional:  x_{j+1} = x_j + x_j^(21/40)
    rh:             x_{j+1} = x_j + 4 sqrt(x_j) log(x_j)

computed in plain double precision, so the boundary sequence is bit-identical
across runs.  Primes are integers, so half-open membership never ties at a
non-integer boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectrum import SIEVE_LIMIT_CAP

SEGMENT_SIZE = 1 << 20


class SieveRangeError(ValueError):
    """Raised when a requested range exceeds the configured limit."""


def next_boundary(x: float, regime: str = "unconditional") -> float:
    """Successor block boundary for x >= 2."""
    if x < 2.0:
        raise ValueError("block boundaries start at x = 2")
    if regime == "rh":
        return x + 4.0 * math.sqrt(x) * math.log(x)
    if regime == "unconditional":
        return x + x ** 0.525
    raise ValueError(f"unknown regime {regime!r}")


class BlockSchedule:
    """Lazily grown, cached boundary sequence for one regime."""

    def __init__(self, regime: str = "unconditional"):
        if regime not in ("unconditional", "rh"):
            raise ValueError(f"unknown regime {regime!r}")
        self.regime = regime
        self._bounds = [2.0]

    def boundary(self, j: int) -> float:
        while len(self._bounds) <= j:
            self._bounds.append(next_boundary(self._bounds[-1], self.regime))
        return self._bounds[j]

    def boundaries_through(self, limit: float) -> list[float]:
        """All boundaries up to and including the first one beyond ``limit``."""
        j = 0
        while self.boundary(j) <= limit:
            j += 1
        return self._bounds[:j + 1]

    def block_primes(self, j: int, limit: int | None = None) -> np.ndarray:
        """Ascending primes in [x_j, x_{j+1}); requires the block inside range."""
        lo, hi = self.boundary(j), self.boundary(j + 1)
        if limit is not None and hi > limit:
            raise SieveRangeError(f"block {j} ends at {hi:g} beyond the limit {limit}")
        return segmented_sieve(int(math.ceil(lo)), int(math.ceil(hi))).primes


@dataclass(frozen=True)
class PrimeSegment:
    """Complete ascending primes in the half-open integer range [lo, hi)."""

    lo: int
    hi: int
    primes: np.ndarray


def simple_sieve(limit: int) -> np.ndarray:
    """Primes <= limit by a dense sieve; used for base primes and tests."""
    if limit < 2:
        return np.empty(0, dtype=np.int64)
    mask = np.ones(limit + 1, dtype=bool)
    mask[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if mask[p]:
            mask[p * p::p] = False
    return np.flatnonzero(mask).astype(np.int64)


def segmented_sieve(lo: int, hi: int) -> PrimeSegment:
    """Ascending complete primes in [lo, hi); deterministic.

    Strikes multiples of the base primes below sqrt(hi) over windows of
    SEGMENT_SIZE so the working set stays cache-sized.
    """
    lo = max(int(lo), 2)
    hi = int(hi)
    if hi > SIEVE_LIMIT_CAP:
        raise SieveRangeError(f"range end {hi} exceeds the configured cap {SIEVE_LIMIT_CAP}")
    if hi <= lo:
        return PrimeSegment(lo=lo, hi=hi, primes=np.empty(0, dtype=np.int64))
    base = simple_sieve(math.isqrt(hi - 1))
    chunks = []
    start = lo
    while start < hi:
        stop = min(start + SEGMENT_SIZE, hi)
        mask = np.ones(stop - start, dtype=bool)
        for p in base:
            p = int(p)
            first = max(p * p, ((start + p - 1) // p) * p)
            if first >= stop:
                continue
            mask[first - start::p] = False
        if start <= 1:
            mask[:2 - start] = False
        found = np.flatnonzero(mask)
        if len(found):
            chunks.append((start + found).astype(np.int64))
        start = stop
    primes = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
    return PrimeSegment(lo=lo, hi=hi, primes=primes)


def primes_upto(limit: int) -> np.ndarray:
    """All primes <= limit, materialized from cache-sized segments."""
    return segmented_sieve(2, int(limit) + 1).primes
