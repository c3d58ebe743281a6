"""Prescribed zero/pole bookkeeping: validation, canonical order, residues.

The user hands in two finite multisets of points inside the open strip
``alpha < Re < 1`` (``alpha`` depends on the regime), an alphabet for the
character values, and a sieve limit.  This module validates the input,
fixes a deterministic enumeration of the points, and derives the residue
each point imposes on the meromorphic target of the construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

ALPHA_UNCONDITIONAL = 21.0 / 40.0
ALPHA_RH = 0.5

#: Beyond this ordinate the exponential weight exp(-z)/z^2 at the pole is so
#: small that atom weights stop being representable in double precision.
IM_LIMIT = 1.0e4

#: Documented hard cap for the sieve range.
SIEVE_LIMIT_CAP = 10**10

#: Character files pack l_roots codes into 4-bit nibbles, so l <= 16.
L_ROOTS_MAX = 16

ALPHABETS = ("cubic", "real", "l_roots")
REGIMES = ("unconditional", "rh")


class SpecValidationError(ValueError):
    """Raised when a spectrum spec violates its invariants.

    ``violations`` holds one dict per broken constraint with the offending
    point, so callers (and the CLI error JSON) can report all of them.
    """

    def __init__(self, violations: list[dict]):
        self.violations = violations
        lines = "; ".join(v["constraint"] + (" at " + v["point"] if v.get("point") else "")
                          for v in violations)
        super().__init__(f"invalid spectrum spec: {lines}")


@dataclass(frozen=True)
class StripPoint:
    """One prescribed zero or pole with its order."""

    re: float
    im: float
    multiplicity: int = 1

    @property
    def point(self) -> complex:
        return complex(self.re, self.im)


@dataclass(frozen=True)
class SpectrumSpec:
    """The single source of truth for the target function.

    alphabet: "cubic" (cubic roots of unity), "real" (+-1, requires
    conjugation-symmetric multisets), or "l_roots" (l-th roots of unity,
    l > 3).  regime picks the strip boundary: 21/40 unconditionally, 1/2
    in the rh mode.
    """

    zeros: tuple[StripPoint, ...]
    poles: tuple[StripPoint, ...]
    alphabet: str = "cubic"
    l: int = 0
    regime: str = "unconditional"
    sieve_limit: int = 10**8

    @property
    def alpha(self) -> float:
        return ALPHA_RH if self.regime == "rh" else ALPHA_UNCONDITIONAL

    @property
    def is_real(self) -> bool:
        return self.alphabet == "real"

    def to_json_dict(self) -> dict:
        alphabet = {"l_roots": self.l} if self.alphabet == "l_roots" else self.alphabet
        return {
            "zeros": [{"re": p.re, "im": p.im, "mult": p.multiplicity} for p in self.zeros],
            "poles": [{"re": p.re, "im": p.im, "mult": p.multiplicity} for p in self.poles],
            "alphabet": alphabet,
            "regime": self.regime,
            "sieve_limit": self.sieve_limit,
        }


@dataclass(frozen=True)
class ResidueTarget:
    """A pole the meromorphic target must carry, with integer residue.

    Zeros prescribe residue -multiplicity, poles +multiplicity: the prime-sum
    side of the construction enters the logarithmic derivative with a minus
    sign, so the residues of the Mellin target are the negatives of the
    residues of zeta'/zeta (which are +k at a zero of order k, -k at a pole).
    """

    point: complex
    residue: int
    order_index: int


def _points_from_json(items) -> tuple[StripPoint, ...]:
    out = []
    for it in items:
        out.append(StripPoint(float(it["re"]), float(it["im"]), int(it.get("mult", 1))))
    return tuple(out)


def spec_from_json_dict(doc: dict) -> SpectrumSpec:
    """Build a (not yet validated) spec from its JSON document form."""
    alphabet = doc.get("alphabet", "cubic")
    l = 0
    if isinstance(alphabet, dict):
        l = int(alphabet["l_roots"])
        alphabet = "l_roots"
    return SpectrumSpec(
        zeros=_points_from_json(doc.get("zeros", [])),
        poles=_points_from_json(doc.get("poles", [])),
        alphabet=alphabet,
        l=l,
        regime=doc.get("regime", "unconditional"),
        sieve_limit=int(doc.get("sieve_limit", 10**8)),
    )


def spec_from_json(text: str) -> SpectrumSpec:
    return spec_from_json_dict(json.loads(text))


def _fmt_point(p: StripPoint) -> str:
    return f"({p.re:g}{p.im:+g}i, mult {p.multiplicity})"


def collect_violations(spec: SpectrumSpec) -> list[dict]:
    """Every violated constraint, with the offending point where there is one."""
    bad: list[dict] = []

    if spec.alphabet not in ALPHABETS:
        bad.append({"constraint": f"unknown alphabet {spec.alphabet!r}", "point": ""})
        return bad
    if spec.regime not in REGIMES:
        bad.append({"constraint": f"unknown regime {spec.regime!r}", "point": ""})
        return bad
    if spec.alphabet == "l_roots":
        if spec.l <= 3:
            bad.append({"constraint": f"l_roots requires l > 3, got l={spec.l}", "point": ""})
        elif spec.l > L_ROOTS_MAX:
            bad.append({"constraint": f"l_roots supports l <= {L_ROOTS_MAX} "
                                      f"(4-bit code slots), got l={spec.l}", "point": ""})

    if spec.sieve_limit < 2:
        bad.append({"constraint": "sieve_limit must be >= 2", "point": ""})
    if spec.sieve_limit > SIEVE_LIMIT_CAP:
        bad.append({"constraint": f"sieve_limit exceeds the hard cap {SIEVE_LIMIT_CAP}",
                    "point": ""})

    alpha = spec.alpha
    for kind, pts in (("zero", spec.zeros), ("pole", spec.poles)):
        for p in pts:
            if p.multiplicity < 1:
                bad.append({"constraint": f"{kind} multiplicity must be >= 1",
                            "point": _fmt_point(p)})
            if not (alpha < p.re < 1.0):
                bad.append({"constraint": f"{kind} outside the open strip "
                                          f"({alpha:g}, 1)", "point": _fmt_point(p)})
            if abs(p.im) > IM_LIMIT:
                bad.append({"constraint": f"|Im| exceeds the documented limit {IM_LIMIT:g} "
                                          "(weight underflow)", "point": _fmt_point(p)})

    zset = {(p.re, p.im) for p in spec.zeros}
    pset = {(p.re, p.im) for p in spec.poles}
    for re, im in sorted(zset & pset):
        bad.append({"constraint": "zeros and poles must be disjoint point sets",
                    "point": f"({re:g}{im:+g}i)"})

    if spec.alphabet == "real":
        for kind, pts in (("zero", spec.zeros), ("pole", spec.poles)):
            mults = {(p.re, p.im): p.multiplicity for p in pts}
            for p in pts:
                conj = (p.re, -p.im)
                if mults.get(conj) != p.multiplicity:
                    bad.append({"constraint": f"real alphabet requires the {kind} multiset "
                                              "to be closed under conjugation",
                                "point": _fmt_point(p)})

    for kind, pts in (("zeros", spec.zeros), ("poles", spec.poles)):
        seen = set()
        for p in pts:
            key = (p.re, p.im)
            if key in seen:
                bad.append({"constraint": f"duplicate point in {kind} "
                                          "(use the multiplicity field)",
                            "point": _fmt_point(p)})
            seen.add(key)

    return bad


def validate_spec(spec: SpectrumSpec) -> SpectrumSpec:
    """Return the spec unchanged iff every invariant holds; raise otherwise."""
    violations = collect_violations(spec)
    if violations:
        raise SpecValidationError(violations)
    return spec


def build_residue_targets(spec: SpectrumSpec) -> tuple[ResidueTarget, ...]:
    """Canonically ordered residue targets: zeros -> -mult, poles -> +mult.

    Sort key (|im|, re, im) keeps conjugate pairs adjacent and hands the
    largest series budgets to low-ordinate points, which need them most.
    """
    entries: list[tuple[complex, int]] = []
    entries += [(p.point, -p.multiplicity) for p in spec.zeros]
    entries += [(p.point, +p.multiplicity) for p in spec.poles]
    entries.sort(key=lambda e: (abs(e[0].imag), e[0].real, e[0].imag))
    return tuple(
        ResidueTarget(point=pt, residue=res, order_index=i)
        for i, (pt, res) in enumerate(entries)
    )
