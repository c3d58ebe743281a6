"""Independent test oracles (never used by the production code).

The kernel of a single pole atom has a closed form: the transform target
is rational in the Laplace variable, so partial fractions give

    kernel_u(u) = W e^{-1} l(u - 1)            for u >= 1, else 0,
    l(v) = A e^{-v} + B v e^{-v} + z0^{-2} e^{(z0-1) v}
           + e^{(z0-2) v} sum_{k=1}^{2n} E_{2n-k} v^{k-1} / (k-1)!

with A, B, E_j from the residue calculus below.  The groups cancel
catastrophically at moderate v (the polynomial block is a truncated Taylor
tail), so everything is evaluated in mpmath at high precision.
"""

from __future__ import annotations

import mpmath as mp


def atom_kernel_closed_form(z0, n, weight, u, dps: int = 80):
    """kernel_u(u) for the atom 1/((z-z0)(z-z0+1)^{2n}) scaled by
    exp(-z)/z^2 and ``weight``; exact up to the working precision."""
    with mp.workdps(dps):
        z0 = mp.mpc(z0)
        W = mp.mpc(weight)
        u = mp.mpf(u)
        if u <= 1:
            return mp.mpc(0)
        v = u - 1
        mu = z0 - 1
        one_minus = 1 - z0
        B = -1 / (z0 * one_minus ** (2 * n))
        A = -1 / (z0 ** 2 * one_minus ** (2 * n)) + 2 * n / (z0 * one_minus ** (2 * n + 1))
        total = A * mp.e ** (-v) + B * v * mp.e ** (-v) + mp.e ** ((z0 - 1) * v) / z0 ** 2
        # E_j = coefficient of w^j in (w + mu)^{-2} (w - 1)^{-1}
        inner = mp.mpc(0)
        poly = mp.mpc(0)
        for k in range(1, 2 * n + 1):
            j = 2 * n - k
            acc = mp.mpc(0)
            for a in range(j + 1):
                acc += (a + 1) * (-1) ** a * mu ** (-a)
            E_j = -acc / mu ** 2
            poly += E_j * v ** (k - 1) / mp.factorial(k - 1)
        total += poly * mp.e ** ((z0 - 2) * v)
        return complex(W * mp.e ** (-1) * total)


def primes_by_trial_division(lo: int, hi: int) -> list[int]:
    """Primes in [lo, hi) the slow dependable way."""
    out = []
    for m in range(max(lo, 2), hi):
        if m % 2 == 0:
            if m == 2:
                out.append(m)
            continue
        f = 3
        is_p = True
        while f * f <= m:
            if m % f == 0:
                is_p = False
                break
            f += 2
        if is_p:
            out.append(m)
    return out
