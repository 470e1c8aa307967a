"""Spherical operators over Ewald spheres: S_r, K_r, dS_r/dr and S_{j,r}.

All profiles are radial, so an integral over Gamma_r(eta) depends only on the
polar angle psi between theta = (xi - eta/2)/|xi - eta/2| and eta. With
t = cos(psi) and R = r|eta|/2,

    |xi|     = (|eta|/2) sqrt(1 + r^2 + 2 r t)
    |eta-xi| = (|eta|/2) sqrt(1 + r^2 - 2 r t)

and dsigma = R^(n-1) omega_{n-2} sin^(n-2)(psi) dpsi. The psi panels are
graded toward both poles, where one of the two radii can get close to zero.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ExtrapolationError, InvalidInputError
from .fields import RadialProfile
from .panels import composite_rule, gauss_legendre, graded_breaks, refine
from .sphere import EwaldSphere, integrate_ewald, quad_rule, sphere_area


@dataclass(frozen=True)
class AngularRule:
    """Graded Gauss-Legendre rule in the polar angle on [0, pi].

    The smallest panel next to each pole is ``grading * length_scale / K`` with
    K = max(1, (|eta|/2) sqrt(r)), the rate at which the near radius moves.
    """

    order: int = 16
    grading: float = 0.25
    subdivisions: int = 1

    def __post_init__(self):
        if self.order < 4:
            raise InvalidInputError("angular order must be at least 4")
        if not self.grading > 0 or self.subdivisions < 1:
            raise InvalidInputError("grading must be positive, subdivisions >= 1")

    def nodes(self, eta_abs, r_max, length_scale=1.0):
        k = max(1.0, 0.5 * eta_abs * np.sqrt(r_max))
        width = min(self.grading * length_scale / k, np.pi / 4)
        breaks = refine(graded_breaks(0.0, np.pi, width, "both"), self.subdivisions)
        return composite_rule(breaks, self.order)

    def refined(self) -> "AngularRule":
        return AngularRule(self.order, self.grading, 2 * self.subdivisions)


DEFAULT_RULE = AngularRule()


def _check_args(eta_abs, r, dim):
    if dim not in (2, 3):
        raise InvalidInputError("dimension must be 2 or 3")
    if not eta_abs > 0:
        raise InvalidInputError("|eta| must be positive")
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)) or not np.all(np.isfinite(r)):
        raise InvalidInputError("r must be positive and finite")
    return r


def _check_reach(profiles, eta_abs, r):
    reach = 0.5 * eta_abs * (1 + float(np.max(r)))
    for p in profiles:
        if reach > p.rho_limit * (1 + 1e-12):
            raise ExtrapolationError(
                f"sphere reaches |xi| = {reach:g} beyond the profile range {p.rho_limit:g}",
                requested_max=reach,
                available_max=p.rho_limit,
            )


def _reduced(integrand, eta_abs, r, dim, rule, length_scale):
    """omega_{n-2} R^(n-1) int_0^pi integrand(a, b, t, R) sin^(n-2) dpsi, batched in r."""
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(r)
    psi, w = rule.nodes(eta_abs, float(np.max(r)), length_scale)
    t = np.cos(psi)[None, :]
    rr = r[:, None]
    half = 0.5 * eta_abs
    a = half * np.sqrt(np.maximum(1 + rr * rr + 2 * rr * t, 0.0))
    b = half * np.sqrt(np.maximum(1 + rr * rr - 2 * rr * t, 0.0))
    R = half * rr
    vals = integrand(a, b, t, R)
    if dim == 3:
        w = w * np.sin(psi)
    out = sphere_area(dim - 1) * (half * r) ** (dim - 1) * (vals @ w)
    return out[0] if scalar else out


def bilinear_s_r(fhat: RadialProfile, ghat: RadialProfile, eta_abs, r, dim, rule=DEFAULT_RULE):
    """2/(|eta|(1+r)) int_{Gamma_r(eta)} f^(xi) g^(eta - xi) dsigma; r may be an array."""
    r = _check_args(eta_abs, r, dim)
    _check_reach((fhat, ghat), eta_abs, r)
    ell = min(fhat.length_scale, ghat.length_scale)
    integral = _reduced(lambda a, b, t, R: fhat(a) * ghat(b), eta_abs, r, dim, rule, ell)
    return 2.0 / (eta_abs * (1 + r)) * integral


def s_r(qhat: RadialProfile, eta_abs, r, dim, rule=DEFAULT_RULE):
    """S_r(q)(eta) by the radial reduction."""
    return bilinear_s_r(qhat, qhat, eta_abs, r, dim, rule)


def k_r(f_abs: RadialProfile, g_abs: RadialProfile, eta_abs, r, dim, rule=DEFAULT_RULE):
    """Majorant K_r(g1, g2)(eta) = |eta|^-1 int_{Gamma_r(eta)} |g1(xi)| |g2(eta - xi)| dsigma."""
    r = _check_args(eta_abs, r, dim)
    _check_reach((f_abs, g_abs), eta_abs, r)
    ell = min(f_abs.length_scale, g_abs.length_scale)
    integral = _reduced(
        lambda a, b, t, R: np.abs(f_abs(a)) * np.abs(g_abs(b)), eta_abs, r, dim, rule, ell
    )
    return np.real(integral) / eta_abs


def ds_r(qhat: RadialProfile, eta_abs, r, dim, rule=DEFAULT_RULE):
    """Radial derivative of S_r(q)(eta).

    Uses dS/dr = c(r) (2/|eta|) int q q dsigma + (2/(1+r)) int theta.grad q^(xi) q^(eta-xi) dsigma
    with c(r) = ((n-2) r + (n-1)) / (r (1+r)^2).
    """
    if not qhat.has_derivative:
        raise InvalidInputError("ds_r needs a profile with a derivative")
    r = _check_args(eta_abs, r, dim)
    _check_reach((qhat,), eta_abs, r)
    half = 0.5 * eta_abs
    ell = qhat.length_scale
    plain = _reduced(lambda a, b, t, R: qhat(a) * qhat(b), eta_abs, r, dim, rule, ell)

    def directional(a, b, t, R):
        # theta . xi / |xi| with xi = eta/2 + R theta
        cos_angle = (half * t + R) / np.where(a > 0, a, 1.0)
        return qhat.derivative(a) * cos_angle * qhat(b)

    grad = _reduced(directional, eta_abs, r, dim, rule, ell)
    coef = ((dim - 2) * r + (dim - 1)) / (r * (1 + r) ** 2)
    return coef * (2.0 / eta_abs) * plain + 2.0 / (1 + r) * grad


def gaussian_s_r(a, eta_abs, r, dim):
    """Closed form of S_r for q^ = exp(-a rho^2): |xi|^2 + |eta-xi|^2 is constant on the sphere."""
    r = np.asarray(r, dtype=float)
    R = 0.5 * r * eta_abs
    return (
        2.0 / (eta_abs * (1 + r))
        * sphere_area(dim)
        * R ** (dim - 1)
        * np.exp(-a * (1 + r * r) * eta_abs**2 / 2)
    )


def gaussian_ds_r(a, eta_abs, r, dim):
    """d/dr of :func:`gaussian_s_r`."""
    r = np.asarray(r, dtype=float)
    s = gaussian_s_r(a, eta_abs, r, dim)
    return s * ((dim - 1) / r - 1 / (1 + r) - a * r * eta_abs**2)


def s_r_full(qhat: RadialProfile, eta_abs, r, dim, order=48, ghat: Optional[RadialProfile] = None):
    """S_r via a full quadrature on Gamma_r(eta); slow cross-check for the radial path."""
    r = float(_check_args(eta_abs, r, dim))
    ghat = qhat if ghat is None else ghat
    _check_reach((qhat, ghat), eta_abs, r)
    eta = np.zeros(dim)
    eta[-1] = eta_abs
    sph = EwaldSphere(eta, r)

    def integrand(xi):
        return qhat(np.linalg.norm(xi, axis=1)) * ghat(np.linalg.norm(eta - xi, axis=1))

    return 2.0 / (eta_abs * (1 + r)) * integrate_ewald(sph, integrand, quad_rule(dim, order))


DEFAULT_S3_ORDERS = {2: (32, 32), 3: (24, 24, 16)}


def s3_r(qhat: RadialProfile, eta_abs, r1, r2, dim, orders: Optional[Sequence[int]] = None):
    """S_{3,(r1,r2)}(q)(eta), vectorized over ``r1`` for a scalar ``r2``.

    xi_1 lies on Gamma_{r1}(eta), xi_2 on Gamma_{r2}(eta); the integrand is
    q^(eta - xi_1) q^(xi_1 - xi_2) q^(xi_2). In 2-D both circle angles use the
    periodic trapezoid rule. In 3-D the polar cosines use Gauss-Legendre and the
    relative azimuth the trapezoid rule; the common azimuth contributes 2 pi.
    """
    scalar = np.ndim(r1) == 0
    r1 = np.atleast_1d(_check_args(eta_abs, r1, dim))
    r2 = float(_check_args(eta_abs, r2, dim))
    _check_reach((qhat,), eta_abs, np.append(r1, r2))
    orders = tuple(orders or DEFAULT_S3_ORDERS[dim])
    half = 0.5 * eta_abs
    R1 = half * r1[:, None, None]
    R2 = half * r2
    if dim == 2:
        if len(orders) != 2:
            raise InvalidInputError("2-D S_3 needs two angular orders")
        m1, m2 = orders
        p1 = 2 * np.pi * np.arange(m1) / m1
        p2 = 2 * np.pi * np.arange(m2) / m2
        c1 = np.cos(p1)[None, :, None]
        c2 = np.cos(p2)[None, None, :]
        c12 = np.cos(p1[:, None] - p2[None, :])[None, :, :]
        weight = (2 * np.pi / m1) * (2 * np.pi / m2)
        measure = R1[:, 0, 0] * R2
    else:
        if len(orders) != 3:
            raise InvalidInputError("3-D S_3 needs three angular orders")
        m1, m2, m3 = orders
        t1, w1 = gauss_legendre(m1)
        t2, w2 = gauss_legendre(m2)
        phi = 2 * np.pi * np.arange(m3) / m3
        s1 = np.sqrt(1 - t1 * t1)
        s2 = np.sqrt(1 - t2 * t2)
        c1 = t1[None, :, None, None]
        c2 = t2[None, None, :, None]
        c12 = (
            t1[:, None, None] * t2[None, :, None]
            + s1[:, None, None] * s2[None, :, None] * np.cos(phi)[None, None, :]
        )[None]
        R1 = R1[..., None]
        weight = (w1[:, None, None] * w2[None, :, None] * np.full(m3, 2 * np.pi / m3))[None]
        weight = weight * 2 * np.pi
        measure = (R1[:, 0, 0, 0] * R2) ** 2
    b1 = np.sqrt(np.maximum(half**2 + R1**2 - 2 * half * R1 * c1, 0.0))
    a2 = np.sqrt(np.maximum(half**2 + R2**2 + 2 * half * R2 * c2, 0.0))
    d12 = np.sqrt(np.maximum(R1**2 + R2**2 - 2 * R1 * R2 * c12, 0.0))
    vals = qhat(b1) * qhat(d12) * qhat(a2) * weight
    total = vals.reshape(vals.shape[0], -1).sum(axis=1) * measure
    pref = (2.0 / (1 + r1)) * (2.0 / (1 + r2)) / eta_abs**2
    out = pref * total
    return out[0] if scalar else out


def s_j_r(qhat: RadialProfile, eta_abs, r_vec, dim, j=None, rule=DEFAULT_RULE, orders=None):
    """S_{j,r}(q)(eta) for j in {2, 3}; ``r_vec`` has length j - 1."""
    r_vec = np.atleast_1d(np.asarray(r_vec, dtype=float))
    j = len(r_vec) + 1 if j is None else j
    if j not in (2, 3):
        raise InvalidInputError("only j = 2 and j = 3 are evaluated")
    if len(r_vec) != j - 1:
        raise InvalidInputError("r_vec must have length j - 1")
    if j == 2:
        return s_r(qhat, eta_abs, float(r_vec[0]), dim, rule)
    return s3_r(qhat, eta_abs, float(r_vec[0]), float(r_vec[1]), dim, orders)


def family_scale(qhat: RadialProfile, eta_abs) -> float:
    """Width in r of the structure of r -> S_r near r = 1.

    On Gamma_r(eta) the smaller radius reaches (|eta|/2)|1 - r|, so features of
    q^ of size ell show up at |1 - r| ~ ell / (|eta|/2).
    """
    return qhat.length_scale / max(1.0, 0.5 * eta_abs)


@dataclass(frozen=True, eq=False)
class DispersionSample:
    """Samples r -> S_r(q)(eta) at a fixed |eta|."""

    eta_abs: float
    r_values: np.ndarray
    values: np.ndarray
    derivative_values: Optional[np.ndarray] = None

    def __post_init__(self):
        r = np.array(self.r_values, dtype=float)
        v = np.array(self.values, dtype=complex)
        if r.ndim != 1 or r.shape != v.shape or r.size < 4:
            raise InvalidInputError("need at least four matching r and value samples")
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise InvalidInputError("r_values must be positive and strictly increasing")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("dispersion values must be finite")
        r.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "r_values", r)
        object.__setattr__(self, "values", v)
        if self.derivative_values is not None:
            d = np.array(self.derivative_values, dtype=complex)
            if d.shape != v.shape:
                raise InvalidInputError("derivative_values shape mismatch")
            d.setflags(write=False)
            object.__setattr__(self, "derivative_values", d)

    @classmethod
    def compute(cls, qhat, eta_abs, r_values, dim, rule=DEFAULT_RULE, with_derivative=False):
        r_values = np.asarray(r_values, dtype=float)
        vals = s_r(qhat, eta_abs, r_values, dim, rule)
        der = ds_r(qhat, eta_abs, r_values, dim, rule) if with_derivative else None
        return cls(eta_abs, r_values, vals, der)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eta_abs", "r", "re", "im"])
        for r, v in zip(self.r_values, self.values):
            w.writerow([repr(float(self.eta_abs)), repr(float(r)), repr(float(v.real)), repr(float(v.imag))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def as_family(self, scale=None):
        """Cubic-spline family r -> F_r; evaluation beyond the last sample is refused."""
        from .pv import Family

        re = CubicSpline(self.r_values, self.values.real)
        im = CubicSpline(self.r_values, self.values.imag)
        lo, hi = self.r_values[0], self.r_values[-1]

        def func(r):
            r = np.asarray(r, dtype=float)
            if np.any(r > hi * (1 + 1e-12)):
                raise ExtrapolationError(
                    "dispersion sample evaluated beyond its r range",
                    requested_max=float(np.max(r)),
                    available_max=float(hi),
                )
            # below the first sample S_r behaves like r^(n-1); take the spline down to lo
            rc = np.clip(r, lo, hi)
            out = re(rc) + 1j * im(rc)
            return np.where(r < lo, out * r / lo, out)

        return Family(func, scale=scale if scale is not None else 1.0, name="sampled dispersion")


def dispersion_family(qhat: RadialProfile, eta_abs, dim, rule=DEFAULT_RULE, ghat=None):
    """The family r -> S_r(q)(eta) (bilinear when ``ghat`` is given) for the PV integrator.

    S_r vanishes like r^(n-1) as r -> 0, and that limit is returned at r = 0.
    """
    from .pv import Family

    ghat = qhat if ghat is None else ghat

    def func(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, dtype=complex)
        pos = r > 0
        if np.any(pos):
            out[pos] = bilinear_s_r(qhat, ghat, eta_abs, r[pos], dim, rule)
        return out

    ell = min(qhat.length_scale, ghat.length_scale)
    scale = ell / max(1.0, 0.5 * eta_abs)
    return Family(func, scale=scale, name=f"S_r at |eta|={eta_abs:g}")
