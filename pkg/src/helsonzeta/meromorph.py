"""Meromorphic target with prescribed simple poles, as a weighted atom series.

Each prescribed point z0 gets a rational atom

    atom(z) = 1 / ((z - z0) * (z - z0 + 1)^(2n))

whose residue at z0 is exactly 1 and whose auxiliary pole z0 - 1 lies left of
the working halfplane.  The exponent n is chosen so two closed-form bounds
certify |atom| < C on { Re z > 1 } and on { |z - z0| > 3, Re z > alpha }.
Scaling by the zero-free decay weight exp(-z)/z^2 and per-atom budgets
C_i = |weight(z_i)| / (|m_i| 2^(i+1)) makes the full series bounded by the
weight itself on Re z > 1 while each residue comes out exactly m_i.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectrum import ALPHA_UNCONDITIONAL, ResidueTarget
from .summation import NeumaierSum

#: Distance below which evaluation refuses to approach a pole.
POLE_PROXIMITY = 1e-12

_MAX_EXPONENT = 200_000


class AssemblyError(ValueError):
    """Raised when the atom series cannot be built for the given targets."""


class PoleProximityError(ValueError):
    """Raised when an evaluation point is within POLE_PROXIMITY of a pole."""


class RadiusError(ValueError):
    """Raised when a contour radius would enclose foreign singularities."""


def decay_weight(z):
    """The zero-free envelope exp(-z)/z^2 that caps the series on Re z > 1."""
    z = np.asarray(z, dtype=complex)
    return np.exp(-z) / (z * z)


def choose_exponent(z0: complex, budget: float, alpha: float = ALPHA_UNCONDITIONAL) -> int:
    """Minimal n certifying |atom| < budget on both control regions.

    On Re z > 1:  |z - z0| >= 1 - Re z0 and |z - z0 + 1| >= 2 - Re z0, so
    1 / ((1 - Re z0) (2 - Re z0)^(2n)) < budget suffices.  On |z - z0| > 3,
    Re z > alpha: |z - z0 + 1| >= 2, so 1 / (3 * 2^(2n)) < budget suffices.
    Both lower bounds depend only on Re z0; the certificate is a proof, not
    a sample.
    """
    re0 = complex(z0).real
    if not (alpha < re0 < 1.0):
        raise AssemblyError(f"pole abscissa {re0!r} outside the open strip ({alpha:g}, 1)")
    if budget <= 0.0:
        raise AssemblyError("budget must be positive")
    gap1 = 1.0 - re0
    base1 = 2.0 - re0
    n = 1
    while n < _MAX_EXPONENT:
        ok1 = 1.0 / (gap1 * base1 ** (2 * n)) < budget
        ok2 = 1.0 / (3.0 * 4.0 ** n) < budget
        if ok1 and ok2:
            return n
        n += 1
    raise AssemblyError("no certifiable exponent below the guard limit")


@dataclass(frozen=True)
class PoleAtom:
    """One rational building block with unit residue at z0."""

    z0: complex
    n: int
    budget: float

    def value(self, z):
        """Atom values; evaluated in log space so huge exponents degrade to 0
        instead of overflowing through inf*complex arithmetic."""
        z = np.asarray(z, dtype=complex)
        return np.exp(-(np.log(z - self.z0) + (2 * self.n) * np.log(z - self.z0 + 1.0)))


@dataclass(frozen=True)
class MeromorphicTarget:
    """The assembled series: weight(z) * sum_i w_i * atom_i(z).

    Immutable after assembly; every method is pure.
    """

    targets: tuple[ResidueTarget, ...]
    atoms: tuple[PoleAtom, ...]
    weights: tuple[complex, ...]
    alpha: float

    @property
    def pole_points(self) -> tuple[complex, ...]:
        return tuple(t.point for t in self.targets)

    @property
    def max_ordinate(self) -> float:
        return max(abs(t.point.imag) for t in self.targets)

    def atom_sum(self, z):
        """sum_i w_i * atom_i(z) (equals |value| / |weight| envelope ratio).

        Summed in enumeration order with compensated accumulation: the
        weights span many orders of magnitude.
        """
        z = np.asarray(z, dtype=complex)
        acc_re = np.zeros(z.shape)
        acc_im = np.zeros(z.shape)
        err_re = np.zeros(z.shape)
        err_im = np.zeros(z.shape)
        for atom, w in zip(self.atoms, self.weights):
            term = w * atom.value(z)
            for acc, err, comp in ((acc_re, err_re, term.real), (acc_im, err_im, term.imag)):
                s = acc + comp
                big = np.abs(acc) >= np.abs(comp)
                err += np.where(big, (acc - s) + comp, (comp - s) + acc)
                acc[...] = s
        return (acc_re + err_re) + 1j * (acc_im + err_im)

    def value(self, z, check_domain: bool = True):
        """Evaluate the target at points with Re z > alpha, away from poles."""
        z = np.asarray(z, dtype=complex)
        if check_domain:
            if np.any(z.real <= self.alpha):
                raise ValueError(f"evaluation requires Re z > {self.alpha:g}")
            for p in self.pole_points:
                d = np.abs(z - p)
                if np.any(d < POLE_PROXIMITY):
                    raise PoleProximityError(f"evaluation within {POLE_PROXIMITY:g} of pole {p}")
        out = decay_weight(z) * self.atom_sum(z)
        if z.shape == ():
            return complex(out)
        return out

    def contour_residue(self, point: complex, radius: float = 0.01, nodes: int = 512) -> complex:
        """Trapezoid approximation of the contour residue on a small circle.

        The circle must stay in the halfplane and enclose at most the one
        candidate pole: radius below half the distance to every other pole
        and to the boundary Re z = alpha.
        """
        point = complex(point)
        if radius <= 0.0:
            raise RadiusError("radius must be positive")
        boundary_gap = point.real - self.alpha
        if radius >= 0.5 * boundary_gap:
            raise RadiusError("radius reaches past half the distance to the strip boundary")
        for p in self.pole_points:
            d = abs(point - p)
            if d > POLE_PROXIMITY and radius >= 0.5 * d:
                raise RadiusError(f"radius reaches past half the distance to pole {p}")
        theta = 2.0 * math.pi * np.arange(nodes) / nodes
        ring = point + radius * np.exp(1j * theta)
        vals = self.value(ring, check_domain=False) * (radius * np.exp(1j * theta))
        acc = NeumaierSum()
        acc_im = NeumaierSum()
        for v in vals:
            acc.add(v.real)
            acc_im.add(v.imag)
        return complex(acc.value(), acc_im.value()) / nodes

    def write_atoms_csv(self, path) -> None:
        """Diagnostic dump of the assembled atoms for inspection."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["index", "re_z0", "im_z0", "residue", "n", "budget",
                         "re_weight", "im_weight"])
            for t, atom, w in zip(self.targets, self.atoms, self.weights):
                wr.writerow([t.order_index, f"{t.point.real:.17g}", f"{t.point.imag:.17g}",
                             t.residue, atom.n, f"{atom.budget:.17g}",
                             f"{w.real:.17g}", f"{w.imag:.17g}"])


def assemble(targets: Sequence[ResidueTarget],
             alpha: float = ALPHA_UNCONDITIONAL) -> MeromorphicTarget:
    """Build the atom series for canonically ordered residue targets."""
    if not targets:
        raise AssemblyError("cannot assemble a target from an empty residue list")
    atoms: list[PoleAtom] = []
    weights: list[complex] = []
    for i, t in enumerate(targets):
        if t.order_index != i:
            raise AssemblyError("targets must arrive in canonical enumeration order")
        g1 = complex(decay_weight(t.point))
        if g1 == 0.0 or not math.isfinite(abs(g1)):
            raise AssemblyError(f"series weight underflowed at {t.point} "
                                "(ordinate beyond the representable range)")
        budget = abs(g1) / (abs(t.residue) * 2.0 ** (i + 1))
        if budget == 0.0:
            raise AssemblyError(f"atom budget underflowed at {t.point}")
        n = choose_exponent(t.point, budget, alpha)
        atoms.append(PoleAtom(z0=complex(t.point), n=n, budget=budget))
        weights.append(t.residue / g1)
    return MeromorphicTarget(targets=tuple(targets), atoms=tuple(atoms),
                             weights=tuple(weights), alpha=alpha)
