import math

import numpy as np
import pytest

from helsonzeta.primes import (BlockSchedule, SieveRangeError, next_boundary,
                               primes_upto, segmented_sieve, simple_sieve)
from .oracles import primes_by_trial_division

RNG = np.random.default_rng(24601)


def test_next_boundary_unconditional():
    assert next_boundary(2.0) == pytest.approx(2.0 + 2.0 ** 0.525, rel=1e-15)
    assert next_boundary(2.0) == pytest.approx(3.43893, abs=1e-5)


def test_next_boundary_rh():
    got = next_boundary(1e4, "rh")
    assert got == pytest.approx(1e4 + 400.0 * math.log(1e4), rel=1e-15)
    assert got == pytest.approx(13684.14, abs=0.01)


def test_boundary_monotone():
    for regime in ("unconditional", "rh"):
        x = 2.0
        for _ in range(200):
            nxt = next_boundary(x, regime)
            assert nxt > x
            x = nxt


def test_boundaries_reproducible():
    a = BlockSchedule("unconditional").boundaries_through(10**6)
    b = BlockSchedule("unconditional").boundaries_through(10**6)
    assert a == b  # bit-identical doubles


def test_segment_10_30():
    seg = segmented_sieve(10, 30)
    assert seg.primes.tolist() == [11, 13, 17, 19, 23, 29]


def test_empty_segment():
    assert segmented_sieve(14, 16).primes.tolist() == []


def test_prime_count_below_1e6():
    # 78498 independently confirmed by trial division at build time
    assert len(primes_upto(10**6 - 1)) == 78498
    assert len(simple_sieve(10**6 - 1)) == 78498


def test_segments_match_trial_division():
    for lo in (2, 5000, 99_000):
        hi = lo + 500
        seg = segmented_sieve(lo, hi)
        assert seg.primes.tolist() == primes_by_trial_division(lo, hi)


def test_segmented_matches_simple():
    assert np.array_equal(primes_upto(300_000), simple_sieve(300_000))


def test_range_cap():
    with pytest.raises(SieveRangeError):
        segmented_sieve(2, 10**10 + 2)


def test_first_block_primes():
    sched = BlockSchedule("unconditional")
    assert sched.block_primes(0).tolist() == [2, 3]


def test_blocks_partition_primes():
    sched = BlockSchedule("unconditional")
    limit = 50_000
    bounds = sched.boundaries_through(limit)
    parts = [sched.block_primes(j) for j in range(len(bounds) - 1)]
    union = np.concatenate(parts)
    assert np.array_equal(np.unique(union), union)  # no duplicates, sorted
    expected = primes_upto(int(math.ceil(bounds[-1])) - 1)
    assert np.array_equal(union, expected)


def test_block_density_past_1e5():
    sched = BlockSchedule("unconditional")
    bounds = sched.boundaries_through(2 * 10**5)
    primes = primes_upto(int(bounds[-1]) + 1)
    checked = 0
    for j in range(len(bounds) - 1):
        if bounds[j] < 1e5:
            continue
        lo = np.searchsorted(primes, bounds[j], side="left")
        hi = np.searchsorted(primes, bounds[j + 1], side="left")
        assert hi - lo >= 1
        checked += 1
    assert checked > 10


def test_rh_blocks_hold_many_primes():
    sched = BlockSchedule("rh")
    bounds = sched.boundaries_through(10**6)
    primes = primes_upto(int(bounds[-1]) + 1)
    for j in range(3, len(bounds) - 1):
        lo = np.searchsorted(primes, bounds[j], side="left")
        hi = np.searchsorted(primes, bounds[j + 1], side="left")
        assert hi - lo >= math.floor(math.sqrt(bounds[j]))
