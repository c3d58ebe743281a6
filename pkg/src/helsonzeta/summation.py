"""Compensated summation primitives shared by the numeric pipeline."""

from __future__ import annotations

import math

import numpy as np


class NeumaierSum:
    """Running compensated sum (Neumaier's improvement of Kahan summation).

    The greedy walk accumulates millions of prime log-masses against kernel
    integrals with heavy cancellation; keeping the error term explicit holds
    the running residual to a few ulp of its own magnitude instead of the
    term magnitudes.  The (hi, lo) state is serialized exactly for
    checkpoint/resume, so continuation is bit-identical.
    """

    __slots__ = ("hi", "lo")

    def __init__(self, hi: float = 0.0, lo: float = 0.0) -> None:
        self.hi = hi
        self.lo = lo

    def add(self, x: float) -> None:
        s = self.hi + x
        if abs(self.hi) >= abs(x):
            self.lo += (self.hi - s) + x
        else:
            self.lo += (x - s) + self.hi
        self.hi = s

    def value(self) -> float:
        return self.hi + self.lo

    def state(self) -> tuple[float, float]:
        return (self.hi, self.lo)

    @classmethod
    def from_state(cls, state) -> "NeumaierSum":
        return cls(float(state[0]), float(state[1]))


def fsum_real(values) -> float:
    """Exactly rounded sum of a real array (Shewchuk accumulation)."""
    arr = np.asarray(values, dtype=float)
    return math.fsum(arr.tolist())


def fsum_complex(values) -> complex:
    """Exactly rounded sum of a complex array, component-wise."""
    arr = np.asarray(values)
    if np.iscomplexobj(arr):
        return complex(math.fsum(arr.real.tolist()), math.fsum(arr.imag.tolist()))
    return complex(fsum_real(arr), 0.0)
