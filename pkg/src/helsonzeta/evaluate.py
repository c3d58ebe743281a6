"""Evaluators and convergence diagnostics for the twisted zeta function.

Nothing here attempts analytic continuation directly: truncated data cannot
resolve zeros below Re s = 1.  The verification strategy is the chain of
certified identities (residues, forward transform, residual bound, difference
convergence), each checkable at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .assigner import CharacterTable
from .mellin import KernelTable
from .summation import fsum_complex, fsum_real

PRIME_POWER_MARGIN = 0.05


@dataclass(frozen=True)
class EvalParams:
    """One evaluation request: point, truncation height, power flag."""

    s: complex
    X: float
    include_prime_powers: bool = True


@dataclass
class ConvergenceReport:
    """Partial values of the defining difference along an increasing X grid."""

    s: complex
    xs: list[float]
    values: list[complex]
    diffs: list[float] = field(default_factory=list)
    fitted_exponent: float = math.nan
    discarded: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("X,re_D,im_D,abs_dD\n")
            for i, (x, v) in enumerate(zip(self.xs, self.values)):
                d = self.diffs[i - 1] if i >= 1 else math.nan
                fh.write(f"{x:.17g},{v.real:.17g},{v.imag:.17g},{d:.17g}\n")

    def tail_sup(self) -> list[float]:
        """Running sup over tail pairs: T_k = max_{j >= k} |dD_j|."""
        out = [0.0] * len(self.diffs)
        running = 0.0
        for i in range(len(self.diffs) - 1, -1, -1):
            running = max(running, self.diffs[i])
            out[i] = running
        return out


def _select(table: CharacterTable, X: float):
    idx = int(np.searchsorted(table.primes, X, side="right"))
    primes = table.primes[:idx].astype(float)
    values = table.values()[:idx]
    return primes, values


def zeta_value(table: CharacterTable, s: complex, X: float | None = None) -> complex:
    """Euler product over primes <= X: prod (1 - chi(p) p^{-s})^{-1}.

    Computed as exp of the compensated sum of -log(1 - chi(p) p^{-s});
    requires Re s > 1 where the product converges.
    """
    s = complex(s)
    if s.real <= 1.0:
        raise ValueError("the Euler product needs Re s > 1")
    X = float(table.sieve_limit if X is None else X)
    if X > table.sieve_limit:
        raise ValueError("truncation beyond the table's sieve limit")
    primes, chi = _select(table, X)
    if len(primes) == 0:
        return 1 + 0j
    w = chi * np.exp(-s * np.log(primes))
    total = fsum_complex(-np.log(1.0 - w))
    result = complex(np.exp(total))
    if table.is_real and s.imag == 0.0:
        result = complex(result.real, 0.0)
    return result


def log_deriv_prime_sum(table: CharacterTable, s: complex, X: float) -> complex:
    """-sum_{p <= X} chi(p) p^{-s} log p, the first-power part of the
    logarithmic derivative."""
    s = complex(s)
    primes, chi = _select(table, float(X))
    if len(primes) == 0:
        return 0j
    lp = np.log(primes)
    return -fsum_complex(chi * np.exp(-s * lp) * lp)


def prime_power_tail(table: CharacterTable, s: complex, X: float) -> complex:
    """-sum over p <= X, a >= 2, p^a <= X^2 of chi(p)^a log(p) p^{-as}.

    chi at prime powers follows from complete multiplicativity.  Absolutely
    convergent for Re s > 1/2; a margin keeps the quadrature of the boundary
    honest.
    """
    s = complex(s)
    if s.real <= 0.5 + PRIME_POWER_MARGIN:
        raise ValueError(f"prime-power tail needs Re s > {0.5 + PRIME_POWER_MARGIN}")
    X = float(X)
    primes, chi = _select(table, X)
    if len(primes) == 0:
        return 0j
    lp = np.log(primes)
    cap = 2.0 * math.log(X)
    total = 0j
    a = 2
    while True:
        mask = a * lp <= cap
        if not mask.any():
            break
        total += fsum_complex((chi[mask] ** a) * lp[mask] * np.exp(-(a * s) * lp[mask]))
        a += 1
    return -total


def log_deriv_value(table: CharacterTable, s: complex, X: float) -> complex:
    """First-power sum plus prime-power tail: the truncated zeta'/zeta."""
    return log_deriv_prime_sum(table, s, X) + prime_power_tail(table, s, X)


def logderiv_consistency(table: CharacterTable, s: complex, X: float,
                         step: float = 1e-5) -> dict:
    """Central difference of log zeta versus the assembled log derivative."""
    s = complex(s)
    up = zeta_value(table, s + step, X)
    dn = zeta_value(table, s - step, X)
    numeric = (np.log(complex(up)) - np.log(complex(dn))) / (2.0 * step)
    direct = log_deriv_value(table, s, X)
    return {"numeric": complex(numeric), "direct": direct,
            "abs_err": abs(complex(numeric) - direct)}


def residual_at(table: CharacterTable, kernel: KernelTable, x: float):
    """r(x) = integral_1^x kernel - sum_{p <= x} chi(p) log p, from scratch."""
    x = float(x)
    if x > table.sieve_limit:
        raise ValueError("x beyond the table's sieve limit")
    if x < 1.0:
        raise ValueError("r is defined for x >= 1")
    total = complex(kernel.integral(1.0, x))
    primes, chi = _select(table, x)
    if len(primes):
        total -= fsum_complex(chi * np.log(primes))
    if table.is_real:
        return total.real
    return total


def difference_series(table: CharacterTable, kernel: KernelTable, s: complex,
                      xs: Sequence[float], alpha: float = 21.0 / 40.0,
                      refine: int = 4) -> ConvergenceReport:
    """D(X, s) = integral_1^X kernel(x) x^{-s} dx - sum_{p <= X} chi(p) p^{-s} log p
    along an increasing X grid, with successive differences and a decay fit.

    The fit is least squares on log |dD| against log X, discarding the first
    quartile of points (warm-up transients).
    """
    s = complex(s)
    if s.real <= alpha:
        raise ValueError(f"difference series needs Re s > {alpha:g}")
    xs = [float(x) for x in xs]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("X grid must be strictly increasing")
    if xs and xs[-1] > table.sieve_limit:
        raise ValueError("X grid beyond the table's sieve limit")
    primes = table.primes.astype(float)
    lp = np.log(primes)
    terms = table.values() * np.exp(-s * lp) * lp
    cum = np.cumsum(terms)
    values: list[complex] = []
    for X in xs:
        integral = kernel.forward_transform(s, x_hi=X, refine=refine)
        idx = int(np.searchsorted(table.primes, X, side="right"))
        psum = complex(cum[idx - 1]) if idx > 0 else 0j
        values.append(complex(integral) - psum)
    report = ConvergenceReport(s=s, xs=xs, values=values)
    report.diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    if len(report.diffs) >= 4:
        discard = len(report.diffs) // 4
        report.discarded = discard
        ln_x = np.log(np.array(xs[:-1]))[discard:]
        ln_d = np.log(np.maximum(np.array(report.diffs)[discard:], 1e-300))
        slope = np.polyfit(ln_x, ln_d, 1)[0]
        report.fitted_exponent = -float(slope)
    return report


def dyadic_grid(limit: float, start: float = 2.0) -> list[float]:
    """The grid 2^k (scaled from ``start``) capped by ``limit``."""
    xs = []
    x = float(start)
    while x <= limit:
        xs.append(x)
        x *= 2.0
    return xs
