import math

import numpy as np
import pytest

import helsonzeta as hz
from helsonzeta.assigner import CharacterTable
from helsonzeta.evaluate import (difference_series, dyadic_grid, log_deriv_prime_sum,
                                 logderiv_consistency, prime_power_tail, residual_at,
                                 zeta_value)
from helsonzeta.mellin import KernelTable
from .oracles import primes_by_trial_division

PRIMES_TO_100 = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47,
                 53, 59, 61, 67, 71, 73, 79, 83, 89, 97]


@pytest.fixture(scope="module")
def ones_1e6():
    return CharacterTable.constant_one(10**6)


def test_euler_product_at_two(ones_1e6):
    got = zeta_value(ones_1e6, 2.0, 10**6)
    assert abs(got - math.pi ** 2 / 6.0) < 2e-7
    assert got.imag == 0.0


def test_rapid_decay_at_ten(ones_1e6):
    got = zeta_value(ones_1e6, 10.0, 10**6)
    lead = 1.0 + 2.0 ** -10 + 3.0 ** -10
    assert abs(got - lead) < 1e-3


def test_real_table_real_result(built_a_small):
    table, _ = built_a_small
    got = zeta_value(table, 1.7, 50_000)
    assert got.imag == 0.0


def test_rejects_re_below_one(ones_1e6):
    with pytest.raises(ValueError):
        zeta_value(ones_1e6, 0.99)


def test_prime_sum_empty_below_two(ones_1e6):
    assert log_deriv_prime_sum(ones_1e6, 2.0, 1.9) == 0.0


def test_prime_sum_against_direct(ones_1e6):
    want = -math.fsum(math.log(p) / p ** 2 for p in PRIMES_TO_100)
    got = log_deriv_prime_sum(ones_1e6, 2.0, 100.0)
    assert got == pytest.approx(want, rel=1e-14)


def test_prime_sum_conjugation(built_a_small):
    table, _ = built_a_small
    s = 1.5 + 2.0j
    a = log_deriv_prime_sum(table, s, 50_000)
    b = log_deriv_prime_sum(table, np.conj(s), 50_000)
    assert b == pytest.approx(np.conj(a), rel=1e-12)


def test_prime_power_tail_against_direct(ones_1e6):
    X = 1000.0
    want = 0.0
    for p in primes_by_trial_division(2, 1001):
        a = 2
        while p ** a <= X * X:
            want -= math.log(p) * p ** (-2.0 * a)
            a += 1
    got = prime_power_tail(ones_1e6, 2.0, X)
    assert got == pytest.approx(want, rel=1e-12)
    # dominated by the p = 2 geometric block: -log(2)/12 at leading order
    assert got == pytest.approx(-math.log(2.0) / 12.0, abs=0.01)


def test_prime_power_tail_real(built_a_small):
    table, _ = built_a_small
    got = prime_power_tail(table, 2.0, 10_000.0)
    assert got.imag == 0.0


def test_prime_power_margin():
    table = CharacterTable.constant_one(1000)
    with pytest.raises(ValueError):
        prime_power_tail(table, 0.52, 1000.0)


def test_prime_power_truncation_shrinks(ones_1e6):
    # the omitted tail is ~ X^{1-2 Re s}: successive caps must converge
    vals = [prime_power_tail(ones_1e6, 0.8, X) for X in (10**3, 10**4, 10**5)]
    d1 = abs(vals[1] - vals[0])
    d2 = abs(vals[2] - vals[1])
    assert d2 < d1


def test_logderiv_consistency(ones_1e6):
    rep = logderiv_consistency(ones_1e6, 2.0, 10**6)
    assert rep["abs_err"] < 1e-6


def test_difference_series_zero_kernel_classical(ones_1e6):
    """kernel = 0, chi = 1, s = 2: D(X) converges to -sum log(p)/p^2."""
    kern = KernelTable.zeros(u_max=16.0)
    xs = dyadic_grid(10**6)
    rpt = difference_series(ones_1e6, kern, 2.0, xs)
    want = -math.fsum(math.log(float(p)) / float(p) ** 2
                      for p in hz.primes_upto(10**6))
    assert rpt.values[-1].real == pytest.approx(want, rel=1e-12)
    assert rpt.diffs[-1] < 1e-4
    assert rpt.fitted_exponent > 0.5


def test_difference_series_validation(built_b_small, kernel_b_small):
    table, _ = built_b_small
    with pytest.raises(ValueError):
        difference_series(table, kernel_b_small, 0.5, [2.0, 4.0])
    with pytest.raises(ValueError):
        difference_series(table, kernel_b_small, 0.8, [4.0, 2.0])


def test_difference_series_b(built_b_small, kernel_b_small):
    table, _ = built_b_small
    rpt = difference_series(table, kernel_b_small, 0.8, dyadic_grid(table.sieve_limit))
    sups = rpt.tail_sup()
    assert sups[-1] < sups[rpt.discarded]          # envelope decays
    assert rpt.fitted_exponent > 0.1
    # the faster classical point
    rpt2 = difference_series(table, kernel_b_small, 2.0, dyadic_grid(table.sieve_limit))
    assert rpt2.fitted_exponent > rpt.fitted_exponent


def test_residual_matches_blocklog(built_b_small, kernel_b_small):
    table, log = built_b_small
    for rec in log.records[1: 60: 7]:
        got = residual_at(table, kernel_b_small, rec.x)
        assert abs(got - rec.r) < 1e-9


def test_residual_below_two_is_integral_only(built_b_small, kernel_b_small):
    table, _ = built_b_small
    x = 1.5
    got = residual_at(table, kernel_b_small, x)
    assert got == pytest.approx(complex(kernel_b_small.integral(1.0, x)), abs=1e-15)


def test_residual_interpolation_bound(built_b_small, kernel_b_small):
    """Between boundaries r is the boundary value plus at most the kernel mass
    and the prime log mass of the partial block."""
    table, log = built_b_small
    for rec, nxt in zip(log.records[10:40:5], log.records[11:41:5]):
        x = 0.5 * (rec.x + nxt.x)
        r_mid = residual_at(table, kernel_b_small, x)
        slack = abs(kernel_b_small.integral(rec.x, x))
        lo = np.searchsorted(table.primes, rec.x, side="left")
        hi = np.searchsorted(table.primes, x, side="right")
        slack += float(np.sum(np.log(table.primes[lo:hi].astype(float))))
        assert abs(r_mid) <= abs(rec.r) + slack + 1e-9


def test_residual_real_mode(built_a_small, kernel_a_small):
    table, _ = built_a_small
    out = residual_at(table, kernel_a_small, 1234.5)
    assert isinstance(out, float)


def test_csv_export(tmp_path, built_b_small, kernel_b_small):
    table, _ = built_b_small
    rpt = difference_series(table, kernel_b_small, 0.8, dyadic_grid(10**4))
    path = tmp_path / "d.csv"
    rpt.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "X,re_D,im_D,abs_dD"
    assert len(lines) == 1 + len(rpt.xs)
