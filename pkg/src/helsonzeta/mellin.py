"""Boundary-trace transform: from the meromorphic target to its Mellin kernel.

The target restricted to the line Re z = 1 is a Hardy-class boundary function;
its Fourier transform is supported on the positive axis and becomes the kernel
after the exponential change of variable.  Conventions are fixed so that

    trace(t) = target(1 - i t) = integral_0^inf kernel_u(y) e^{i t y} dy,
    kernel_u(y) = (1 / 2 pi) integral trace(t) e^{-i t y} dt,
    kernel(x)   = kernel_u(log x),

and the forward identity  target(s) = integral_1^inf kernel(x) x^{-s} dx
holds for Re s > 1.  The grid is engineered so the DFT phase factor
e^{i T y_m} collapses to (-1)^m exactly.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .meromorph import MeromorphicTarget
from .summation import fsum_complex, fsum_real

KERNEL_MAGIC = b"HZKQ"
KERNEL_VERSION = 1

#: Default transform grid: half-width T and sample count N.
DEFAULT_HALF_WIDTH = 4096.0
DEFAULT_SAMPLES = 1 << 20

DEFAULT_TOLERANCES = {
    "tail": 2e-4,        # bound on the neglected |t| > T mass of the trace
    "causality": 1e-6,   # max |kernel_u| allowed on [-1, 0)
    "reality": 1e-10,    # max |Im kernel_u| allowed in real mode
    "decay": 1e-6,       # |kernel_u| at the far end of the table
}

#: exp(u) overflows past ~709; the x-space integral accessor stays below this.
_U_EXP_CAP = 700.0

#: Relative envelope floor below which forward-integral tails are dropped.
_INTEGRAND_FLOOR = 1e-26


class TransformGridError(ValueError):
    """Raised when the requested grid cannot meet the configured tolerances."""


class KernelRangeError(ValueError):
    """Raised when an evaluation point leaves the tabulated kernel range."""


@dataclass(frozen=True)
class BoundaryTrace:
    """Samples of the target on the critical line Re z = 1.

    The grid is t_k = -half_width + k dt for k = 0..n-1; ``end_value`` holds
    the sample at +half_width used for the trapezoid end correction.
    """

    half_width: float
    n: int
    dt: float
    values: np.ndarray
    end_value: complex
    tail_estimate: float

    def t_grid(self) -> np.ndarray:
        return -self.half_width + self.dt * np.arange(self.n)


def sample_boundary(model: MeromorphicTarget,
                    half_width: float = DEFAULT_HALF_WIDTH,
                    n: int = DEFAULT_SAMPLES,
                    tail_tol: float = DEFAULT_TOLERANCES["tail"]) -> BoundaryTrace:
    """Sample the boundary trace on a symmetric uniform grid.

    Requires n to be a power of two, the analytic tail estimate
    2 e^{-1} / half_width to clear ``tail_tol``, and the half-width to cover
    the prescribed ordinates (poles beyond the sampled band would silently
    vanish from the kernel).
    """
    if n < 2 or (n & (n - 1)) != 0:
        raise TransformGridError("sample count must be a power of two")
    tail = 2.0 * math.exp(-1.0) / half_width
    if tail > tail_tol:
        raise TransformGridError(
            f"half-width {half_width:g} leaves tail estimate {tail:.3g} > {tail_tol:g}")
    needed = 2.0 * model.max_ordinate + 64.0
    if half_width < needed:
        raise TransformGridError(
            f"half-width {half_width:g} below {needed:g} required by the "
            "prescribed ordinates")
    dt = 2.0 * half_width / n
    t = -half_width + dt * np.arange(n)
    values = model.value(1.0 - 1j * t, check_domain=False)
    end_value = complex(model.value(1.0 - 1j * half_width, check_domain=False))
    return BoundaryTrace(half_width=half_width, n=n, dt=dt, values=values,
                         end_value=end_value, tail_estimate=tail)


@dataclass
class KernelTable:
    """The sampled Mellin kernel on a uniform log grid.

    ``values[k]`` is kernel_u at u = u0 + k du; u0 is derived canonically
    from (u_max, du, count) so that a table loaded from disk is bit-identical
    to the one built in memory.
    """

    du: float
    u_max: float
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    _f_cache: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def u0(self) -> float:
        return self.u_max - (self.count - 1) * self.du

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    @classmethod
    def zeros(cls, du: float = 1e-3, u_min: float = -1.0, u_max: float = 25.0,
              real: bool = True) -> "KernelTable":
        """An identically-zero kernel (useful as a null transform)."""
        count = int(math.floor((u_max - u_min) / du)) + 1
        dtype = float if real else complex
        top = u_min + (count - 1) * du
        return cls(du=du, u_max=top, values=np.zeros(count, dtype=dtype))

    # -- point access ------------------------------------------------------

    def _locate(self, u: float) -> tuple[int, float]:
        """Cell index and barycentric offset, snapping near-exact nodes.

        The snap (1e-9 of a cell) makes node identity survive the one-ulp
        u0 shift a save/load round trip can introduce.
        """
        pos = (u - self.u0) / self.du
        k = int(math.floor(pos))
        theta = pos - k
        if theta < 1e-9:
            theta = 0.0
        elif theta > 1.0 - 1e-9:
            k += 1
            theta = 0.0
        if k < 0 or k > self.count - 1 or (k == self.count - 1 and theta > 0.0):
            raise KernelRangeError(f"u = {u:g} outside the tabulated range "
                                   f"[{self.u0:g}, {self.u_max:g}]")
        return k, theta

    def value_at_u(self, u: float):
        """Linear interpolation of kernel_u (linearity keeps block integrals
        additive and deterministic; the grid is fine enough that splines buy
        nothing)."""
        k, theta = self._locate(u)
        if theta == 0.0:
            v = self.values[k]
        else:
            v = self.values[k] * (1.0 - theta) + self.values[k + 1] * theta
        return float(v) if self.is_real else complex(v)

    def kernel_value(self, x: float):
        """kernel(x) = kernel_u(log x) for x >= 1 within the table range."""
        if x < 1.0:
            raise KernelRangeError("kernel is defined on [1, inf)")
        return self.value_at_u(math.log(x))

    # -- integrals ---------------------------------------------------------

    def _f(self) -> np.ndarray:
        """Cached x-measure integrand kernel_u(u) e^u on nodes with u <= 700."""
        if self._f_cache is None:
            cap = min(self.count, int(math.floor((_U_EXP_CAP - self.u0) / self.du)) + 1)
            u = self.u0 + self.du * np.arange(cap)
            self._f_cache = self.values[:cap] * np.exp(u)
        return self._f_cache

    def integral(self, a: float, b: float):
        """integral_a^b kernel(x) dx via u = log x on the table grid.

        Exact integration of the piecewise-linear interpolant of
        kernel_u(u) e^u: trapezoid over interior nodes plus interpolated
        partial cells, so splitting the range anywhere reproduces the sum.
        """
        if not (1.0 <= a <= b):
            raise KernelRangeError("need 1 <= a <= b")
        if a == b:
            return 0.0 if self.is_real else 0j
        f = self._f()
        ua, ub = math.log(a), math.log(b)
        top = self.u0 + (len(f) - 1) * self.du
        if ub > top + 1e-12:
            raise KernelRangeError(f"b = {b:g} beyond the integrable range")

        def interp(u):
            k, theta = self._locate(u)
            if theta == 0.0:
                return f[k]
            return f[k] * (1.0 - theta) + f[k + 1] * theta

        ka, tha = self._locate(ua)
        kb, thb = self._locate(ub)
        i0 = ka if tha == 0.0 else ka + 1
        i1 = kb
        if i1 < i0:
            # both endpoints inside one cell
            val = 0.5 * (interp(ua) + interp(ub)) * (ub - ua)
            return float(val) if self.is_real else complex(val)
        interior = f[i0:i1 + 1]
        if self.is_real:
            s = fsum_real(interior) - 0.5 * (f[i0] + f[i1])
            s *= self.du
        else:
            s = fsum_complex(interior) - 0.5 * (f[i0] + f[i1])
            s *= self.du
        left = self.u0 + i0 * self.du - ua
        if left > 0.0:
            s += 0.5 * (interp(ua) + f[i0]) * left
        right = ub - (self.u0 + i1 * self.du)
        if right > 0.0:
            s += 0.5 * (f[i1] + interp(ub)) * right
        return float(s.real) if self.is_real else complex(s)

    def forward_transform(self, s: complex, x_hi: float | None = None,
                          refine: int = 4) -> complex:
        """integral_1^{x_hi} kernel(x) x^{-s} dx (default: whole table).

        Trapezoid in u on the table's linear interpolant, refined ``refine``
        sub-cells per table cell; the dominant error is then the kernel's own
        interpolation error, which scales as du^2 under grid refinement.
        Tails whose envelope falls 26 orders below the peak are dropped.
        """
        s = complex(s)
        c = 1.0 - s
        i_zero, theta = self._locate(0.0)
        if theta != 0.0:
            raise KernelRangeError("table grid does not contain u = 0")
        vals = np.asarray(self.values[i_zero:], dtype=complex)
        n = len(vals)
        u_start = 0.0
        if x_hi is not None:
            if x_hi < 1.0:
                raise KernelRangeError("x_hi must be >= 1")
            u_hi = math.log(x_hi)
            if u_hi > self.u_max + 1e-12:
                raise KernelRangeError(f"x_hi = {x_hi:g} beyond the table range")
        else:
            u_hi = self.u_max - self.u0 - i_zero * self.du  # full tail
            # drop the part that cannot contribute at double precision
            env = np.abs(vals) * np.exp(c.real * (self.du * np.arange(n)))
            peak = env.max()
            if peak == 0.0:
                return 0j
            keep = np.nonzero(env > peak * _INTEGRAND_FLOOR)[0]
            u_hi = min(u_hi, self.du * (int(keep[-1]) + 1))

        n_full = int(math.floor(u_hi / self.du + 1e-12))
        n_full = min(n_full, n - 1)
        total = 0j
        if n_full >= 1:
            base = vals[:n_full + 1]
            tgrid = np.arange(refine) / refine
            pref = (base[:-1, None] * (1.0 - tgrid) + base[1:, None] * tgrid).ravel()
            pref = np.append(pref, base[-1])
            ur = u_start + (self.du / refine) * np.arange(len(pref))
            integrand = pref * np.exp(c * ur)
            w = np.full(len(pref), self.du / refine)
            w[0] *= 0.5
            w[-1] *= 0.5
            total += np.sum(integrand * w)
        # partial top cell
        u_lo = n_full * self.du
        if u_hi > u_lo + 1e-15 and n_full + 1 <= n - 1:
            lo_v = vals[n_full]
            hi_v = vals[n_full + 1]
            uu = np.linspace(u_lo, u_hi, refine + 1)
            pp = lo_v + (hi_v - lo_v) * ((uu - u_lo) / self.du)
            integrand = pp * np.exp(c * uu)
            w = np.full(refine + 1, (u_hi - u_lo) / refine)
            w[0] *= 0.5
            w[-1] *= 0.5
            total += np.sum(integrand * w)
        return complex(total)

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        """Flat binary: magic, version u32, du f64, u_max f64, count u64,
        then little-endian (re, im) f64 pairs."""
        vals = np.asarray(self.values, dtype=complex)
        with open(path, "wb") as fh:
            fh.write(KERNEL_MAGIC)
            fh.write(struct.pack("<I", KERNEL_VERSION))
            fh.write(struct.pack("<d", self.du))
            fh.write(struct.pack("<d", self.u_max))
            fh.write(struct.pack("<Q", self.count))
            inter = np.empty(2 * len(vals), dtype="<f8")
            inter[0::2] = vals.real
            inter[1::2] = vals.imag
            fh.write(inter.tobytes())

    @classmethod
    def load(cls, path) -> "KernelTable":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != KERNEL_MAGIC:
                raise ValueError(f"not a kernel file (magic {magic!r})")
            version, = struct.unpack("<I", fh.read(4))
            if version != KERNEL_VERSION:
                raise ValueError(f"unsupported kernel version {version}")
            du, = struct.unpack("<d", fh.read(8))
            u_max, = struct.unpack("<d", fh.read(8))
            count, = struct.unpack("<Q", fh.read(8))
            payload = fh.read(16 * count)
            if len(payload) != 16 * count:
                raise ValueError("truncated kernel payload")
        inter = np.frombuffer(payload, dtype="<f8")
        vals = inter[0::2] + 1j * inter[1::2]
        if not np.any(vals.imag):
            vals = vals.real.copy()
        else:
            vals = vals.copy()
        return cls(du=du, u_max=u_max, values=vals)

    def export_csv(self, path) -> None:
        """u, Re kernel_u, Im kernel_u rows for plotting."""
        u = self.u0 + self.du * np.arange(self.count)
        vals = np.asarray(self.values, dtype=complex)
        with open(path, "w") as fh:
            fh.write("u,re_kernel,im_kernel\n")
            for uu, vv in zip(u, vals):
                fh.write(f"{uu:.17g},{vv.real:.17g},{vv.imag:.17g}\n")


def kernel_from_trace(trace: BoundaryTrace,
                      u_neg: float = 1.0,
                      min_u_max: float | None = None,
                      as_real: bool = False,
                      tolerances: dict | None = None) -> KernelTable:
    """Discrete Fourier transform of the trace into the kernel table.

    Rectangle sum over the sampled window via FFT plus the trapezoid end
    correction; on this grid the carrier phase e^{i T y_m} is exactly
    (-1)^m.  The output is rolled so the table covers [-u_neg, u_max], the
    negative part existing purely to witness causality.
    """
    tol = dict(DEFAULT_TOLERANCES)
    if tolerances:
        tol.update(tolerances)
    h = np.asarray(trace.values, dtype=complex)
    n = trace.n
    dt = trace.dt
    du = 2.0 * math.pi / (n * dt)
    if min_u_max is not None:
        available = (n - 1) * du - u_neg - 1.0
        if available < min_u_max:
            raise TransformGridError(
                f"grid reaches u ~ {available:.1f} < required {min_u_max:.1f}; "
                "increase the sample count or the time step")
    raw = np.fft.fft(h)
    raw += 0.5 * (trace.end_value - h[0])
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    kernel_u = (dt / (2.0 * math.pi)) * signs * raw

    m_neg = int(math.ceil(u_neg / du))
    table = np.roll(kernel_u, m_neg)
    u_max = (n - 1 - m_neg) * du

    causality_max = float(np.abs(table[:m_neg]).max()) if m_neg else 0.0
    reality_max = float(np.abs(table.imag).max())
    decay_edge = float(abs(table[-1]))
    diagnostics = {
        "causality_max": causality_max,
        "reality_max": reality_max,
        "decay_edge": decay_edge,
        "tail_estimate": trace.tail_estimate,
        "half_width": trace.half_width,
        "n_samples": n,
        "du": du,
    }
    if causality_max > tol["causality"]:
        raise TransformGridError(
            f"causality residual {causality_max:.3g} exceeds {tol['causality']:g}")
    if decay_edge > tol["decay"]:
        raise TransformGridError(
            f"kernel fails to decay at the far end ({decay_edge:.3g})")
    if as_real:
        if reality_max > tol["reality"]:
            raise TransformGridError(
                f"imaginary residue {reality_max:.3g} exceeds {tol['reality']:g} "
                "for a real-mode kernel")
        table = table.real.copy()
    return KernelTable(du=du, u_max=u_max, values=table, diagnostics=diagnostics)


def build_kernel(model: MeromorphicTarget,
                 half_width: float = DEFAULT_HALF_WIDTH,
                 n: int = DEFAULT_SAMPLES,
                 sieve_limit: int | None = None,
                 as_real: bool = False,
                 tolerances: dict | None = None) -> KernelTable:
    """Sample the boundary and transform in one step."""
    tol = dict(DEFAULT_TOLERANCES)
    if tolerances:
        tol.update(tolerances)
    trace = sample_boundary(model, half_width=half_width, n=n, tail_tol=tol["tail"])
    min_u = math.log(sieve_limit) + 1.0 if sieve_limit else None
    return kernel_from_trace(trace, min_u_max=min_u, as_real=as_real, tolerances=tol)


def default_roundtrip_samples(model: MeromorphicTarget, count: int = 20) -> list[complex]:
    """Deterministic sample points for the forward-identity check.

    Points sit at the prescribed ordinates (clamped to |Im| <= 50) with real
    parts fanned over [1.1, 1.4]: away from the ordinates the target decays
    below the double-precision floor and relative error stops being
    measurable.
    """
    ordinates = sorted({max(-50.0, min(50.0, t.point.imag)) for t in model.targets})
    if not ordinates:
        ordinates = [0.0]
    n_re = max(2, -(-count // len(ordinates)))
    res = np.linspace(1.1, 1.4, n_re)
    samples = [complex(re, im) for re in res for im in ordinates]
    return samples[:count]


def roundtrip_report(table: KernelTable, model: MeromorphicTarget,
                     samples: Sequence[complex], refine: int = 4) -> dict:
    """Compare the forward quadrature against direct evaluation.

    Reports per-sample and maximal absolute/relative errors; purely
    diagnostic.
    """
    rows = []
    max_abs = 0.0
    max_rel = 0.0
    for s in samples:
        s = complex(s)
        if s.real < 1.1:
            raise ValueError("roundtrip samples need Re s >= 1.1 for conditioning")
        quad = table.forward_transform(s, refine=refine)
        exact = complex(model.value(s))
        err = abs(quad - exact)
        rel = err / abs(exact) if exact != 0.0 else math.inf
        rows.append({"s": s, "quadrature": quad, "exact": exact,
                     "abs_err": err, "rel_err": rel})
        max_abs = max(max_abs, err)
        max_rel = max(max_rel, rel)
    return {"max_abs_err": max_abs, "max_rel_err": max_rel, "samples": rows}
