"""The distributions d(F) = F_1 and P(F) = p.v. int_0^inf F_r / (1 - r) dr.

``pv_integrate`` splits (0, inf) into

* a left region (0, 1 - delta) and a right region (1 + delta, r_max) covered
  by composite Gauss-Legendre panels, dyadic on the right;
* a near region |1 - r| < delta treated by one of two schemes:
  ``symmetric_reflection`` integrates (F_{1-u} - F_{1+u}) / u over (0, delta);
  ``taylor_subtraction`` integrates (F_r - F_1)/(1 - r) on a small inner
  window and F_r/(1 - r) on the rest of the near region;
* a tail beyond r_max that is probed and bounded, never integrated.

The value returned is the finer of two panel resolutions; their difference
plus the tail bound is the reported error estimate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, InvalidInputError, TruncationError
from .panels import composite_rule, graded_breaks, refine

NEAR_SCHEMES = ("symmetric_reflection", "taylor_subtraction")


@dataclass(frozen=True)
class PVScheme:
    delta: float = 0.5
    panel_order: int = 16
    r_max: float = 1024.0
    tail_tol: float = 1e-6
    near_scheme: str = "symmetric_reflection"
    subdivisions: int = 1
    smoothness_limit: float = 0.75

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise InvalidInputError("pv.delta must lie in (0, 1)")
        if self.panel_order < 8:
            raise InvalidInputError("pv.panel_order must be at least 8")
        if not (np.isfinite(self.r_max) and self.r_max > 1 + self.delta):
            raise InvalidInputError("pv.r_max must be finite and exceed 1 + delta")
        if not self.tail_tol > 0:
            raise InvalidInputError("pv.tail_tol must be positive")
        if self.near_scheme not in NEAR_SCHEMES:
            raise InvalidInputError(f"unknown near scheme {self.near_scheme!r}")
        if self.subdivisions < 1:
            raise InvalidInputError("subdivisions must be at least 1")

    def with_subdivisions(self, s: int) -> "PVScheme":
        return PVScheme(
            self.delta, self.panel_order, self.r_max, self.tail_tol, self.near_scheme, s,
            self.smoothness_limit,
        )


@dataclass(frozen=True)
class Family:
    """A one-parameter family r -> F_r, vectorized over arrays of r.

    ``scale`` is the width in r of the finest feature near r = 1; panels next
    to the singularity are refined down to a quarter of it. ``breakpoints`` are
    values of r where F may jump or kink.
    """

    func: Callable
    scale: float = 1.0
    breakpoints: Sequence[float] = ()
    name: str = ""

    def __call__(self, r):
        return np.asarray(self.func(np.asarray(r, dtype=float)), dtype=complex)


def as_family(obj) -> Family:
    if isinstance(obj, Family):
        return obj
    if hasattr(obj, "as_family"):
        return obj.as_family()
    if callable(obj):
        return Family(obj)
    raise InvalidInputError("expected a Family, a DispersionSample or a callable")


@dataclass(frozen=True)
class PVResult:
    value: complex
    error_estimate: float
    tail_bound: float
    tail_exponent: float
    smoothness_ratio: float
    evaluations: int
    scheme: PVScheme = field(repr=False)

    def as_dict(self):
        return {
            "re": float(self.value.real),
            "im": float(self.value.imag),
            "error_estimate": self.error_estimate,
            "tail_bound": self.tail_bound,
            "tail_exponent": self.tail_exponent,
            "smoothness_ratio": self.smoothness_ratio,
            "evaluations": self.evaluations,
        }


def delta_part(family) -> complex:
    """d(F) = F_1."""
    return complex(as_family(family)(np.array([1.0]))[0])


def _with_breakpoints(breaks, points):
    inside = [p for p in points if breaks[0] < p < breaks[-1]]
    return np.unique(np.concatenate([breaks, inside]))


def _segments(scheme: PVScheme, fam: Family):
    """(breaks, kind) pieces of the quadrature; kind selects the integrand."""
    d = scheme.delta
    width = min(0.25 * fam.scale, 0.25 * d)
    bp = [float(p) for p in fam.breakpoints]
    if any(abs(p - 1) < d for p in bp):
        raise InvalidInputError("family breakpoints must lie outside the near window")
    left = _with_breakpoints(graded_breaks(0.0, 1 - d, 0.5 * d, "b"), bp)
    right_breaks = [1 + d]
    x = 2.0
    while x < scheme.r_max:
        if x > 1 + d:
            right_breaks.append(x)
        x *= 2
    right_breaks.append(scheme.r_max)
    right = _with_breakpoints(np.array(right_breaks), bp)
    pieces = [(left, "plain"), (right, "plain")]
    if scheme.near_scheme == "symmetric_reflection":
        pieces.append((graded_breaks(0.0, d, width, "a"), "reflect"))
    else:
        inner = min(0.5 * d, 8 * width)
        pieces.append((graded_breaks(1 - inner, 1 + inner, width, "both"), "subtract"))
        pieces.append((graded_breaks(1 - d, 1 - inner, width, "b"), "plain"))
        pieces.append((graded_breaks(1 + inner, 1 + d, width, "a"), "plain"))
    return pieces


def _assemble(scheme: PVScheme, fam: Family, f1: complex):
    """Quadrature value of P(F) at the scheme's resolution, and the node values."""
    total = 0.0 + 0.0j
    peak = abs(f1)
    count = 0
    for breaks, kind in _segments(scheme, fam):
        x, w = composite_rule(refine(breaks, scheme.subdivisions), scheme.panel_order)
        if kind == "plain":
            v = fam(x)
            total += np.sum(w * v / (1 - x))
        elif kind == "reflect":
            lo, hi = fam(1 - x), fam(1 + x)
            v = np.concatenate([lo, hi])
            total += np.sum(w * (lo - hi) / x)
        else:
            v = fam(x)
            total += np.sum(w * (v - f1) / (1 - x))
        count += v.size
        if v.size:
            peak = max(peak, float(np.max(np.abs(v))))
    return total, peak, count


def _tail(scheme: PVScheme, fam: Family, peak: float):
    probes = scheme.r_max * np.array([1.0, 2.0, 4.0])
    mags = np.abs(fam(probes))
    if not np.all(np.isfinite(mags)):
        raise TruncationError("family is not finite beyond r_max", probes=mags.tolist())
    largest = float(mags.max())
    if peak == 0 or largest == 0:
        return 0.0, np.inf
    if largest > scheme.tail_tol * peak:
        raise TruncationError(
            f"family has not decayed at r_max = {scheme.r_max:g}",
            largest_probe=largest,
            peak=peak,
            tail_tol=scheme.tail_tol,
        )
    if mags[2] == 0:
        return 0.0, np.inf
    p = float(np.log(mags[0] / mags[2]) / np.log(4.0)) if mags[0] > 0 else 0.0
    if p <= 0.05:
        raise TruncationError(
            "family tail does not decay beyond r_max", tail_exponent=p, probes=mags.tolist()
        )
    # |F_r| <= |F_{r_max}| (r/r_max)^-p  =>  int |F|/(r-1) <= |F_{r_max}| r_max/((r_max-1) p)
    bound = largest * scheme.r_max / ((scheme.r_max - 1) * p)
    return bound, p


def _smoothness(fam: Family, h: float, peak: float) -> float:
    """Contraction ratio of the reflected quotient g(u) = (F_{1-u} - F_{1+u})/u.

    With g evaluated at u = h, h/2, h/4, h/8 the ratio of consecutive
    differences is about 1/4 for C^2 families, 2^(1-a) for a Holder-a jump
    structure and 2 for a jump at r = 1. Differences at rounding level count
    as smooth.
    """
    u = h / np.array([1.0, 2.0, 4.0, 8.0])
    g = (fam(1 - u) - fam(1 + u)) / u
    d = np.abs(np.diff(g))
    floor = 1e-10 * max(peak, 1e-300) / h
    if d[1] <= floor or d[2] <= floor:
        return 0.0
    return float(max(d[1] / d[0], d[2] / d[1]))


def pv_integrate(family, scheme: PVScheme = PVScheme()) -> PVResult:
    """P(F) with error estimate, tail bound and smoothness diagnostic."""
    fam = as_family(family)
    f1 = complex(fam(np.array([1.0]))[0])
    if not np.isfinite(f1):
        raise InvalidInputError("family is not finite at r = 1")
    coarse, peak, n1 = _assemble(scheme, fam, f1)
    fine_scheme = scheme.with_subdivisions(2 * scheme.subdivisions)
    fine, peak2, n2 = _assemble(fine_scheme, fam, f1)
    peak = max(peak, peak2)
    if not np.isfinite(fine):
        raise ConvergenceError("principal value is not finite")
    h = 0.25 * min(fam.scale, scheme.delta)
    ratio = _smoothness(fam, h, peak)
    if ratio > scheme.smoothness_limit:
        raise ConvergenceError(
            "family is not smooth at r = 1; the principal value may not exist",
            reflected_difference_ratio=ratio,
        )
    tail, p = _tail(scheme, fam, peak)
    return PVResult(
        value=complex(fine),
        error_estimate=float(abs(fine - coarse) + tail),
        tail_bound=float(tail),
        tail_exponent=float(p),
        smoothness_ratio=ratio,
        evaluations=n1 + n2 + 8,
        scheme=scheme,
    )


def pv_part(family, scheme: PVScheme = PVScheme()) -> complex:
    return pv_integrate(family, scheme).value


def apply_dispersion_pv(family, scheme: PVScheme = PVScheme()) -> complex:
    """(i pi d + P) F."""
    fam = as_family(family)
    return 1j * np.pi * delta_part(fam) + pv_part(fam, scheme)


def reference_pv(family, *, method="symmetric_pair", r_max=np.inf, epsrel=1e-10, epsabs=None):
    """Adaptive QUADPACK evaluation of P(F), independent of the panel scheme.

    ``symmetric_pair`` integrates (F_{1-u} - F_{1+u})/u over (0, 1) and F/(1-r)
    beyond r = 2. ``cauchy`` uses the QAWC Cauchy-weight rule on (0, 2).
    Real and imaginary parts are integrated separately. The default absolute
    tolerance is ``epsrel`` times the largest |F_r| seen on a coarse scan, so
    integrals that cancel to zero still terminate.
    """
    fam = as_family(family)
    if epsabs is None:
        scan = np.abs(fam(np.linspace(1e-3, 4.0, 801)))
        epsabs = epsrel * max(float(scan.max()), 1e-300)
    bp = sorted(float(p) for p in fam.breakpoints)
    scale = fam.scale

    def scalar(r):
        return complex(fam(np.array([r]))[0])

    def quad_parts(f, a, b, **kw):
        out = 0.0j
        for part in (np.real, np.imag):
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    val, _ = integrate.quad(
                        lambda x: part(f(x)), a, b, epsabs=epsabs, epsrel=epsrel, limit=500, **kw
                    )
                except integrate.IntegrationWarning as exc:
                    raise ConvergenceError(f"reference quadrature failed: {exc}") from None
            out += val if part is np.real else 1j * val
        return out

    if method == "symmetric_pair":
        pts = [u for u in (scale, 4 * scale, 16 * scale) if u < 1]
        pts += [abs(1 - p) for p in bp if abs(1 - p) < 1]
        near = quad_parts(lambda u: (scalar(1 - u) - scalar(1 + u)) / u, 0.0, 1.0, points=sorted(set(pts)) or None)
    elif method == "cauchy":
        if any(0 < p < 2 for p in bp):
            raise InvalidInputError("the cauchy reference needs breakpoints outside (0, 2)")
        # QAWC computes p.v. int f(r)/(r - 1); P carries 1/(1 - r)
        near = -quad_parts(scalar, 0.0, 2.0, weight="cauchy", wvar=1.0)
    else:
        raise InvalidInputError(f"unknown reference method {method!r}")
    far_breaks = [2.0] + [p for p in bp if p > 2 and p < r_max]
    far = 0.0j
    ends = far_breaks + [r_max]
    for a, b in zip(ends[:-1], ends[1:]):
        far += quad_parts(lambda r: scalar(r) / (1 - r), a, b)
    return near + far
