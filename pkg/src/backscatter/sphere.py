"""Ewald-sphere geometry, quadrature on spheres and two sphere-integral inequalities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, roots_jacobi

from .errors import ConvergenceError, InvalidInputError
from .panels import composite_rule, gauss_legendre, graded_breaks


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^(dim-1) in R^dim (dim >= 1)."""
    return float(2 * np.pi ** (dim / 2) / gamma(dim / 2))


@dataclass(frozen=True)
class EwaldSphere:
    """Gamma_r(eta): center eta/2, radius r|eta|/2."""

    eta: np.ndarray
    r: float

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        if eta.ndim != 1 or eta.size < 2:
            raise InvalidInputError("eta must be a vector in R^n, n >= 2")
        if not self.r > 0:
            raise InvalidInputError("r must be positive")
        if not np.linalg.norm(eta) > 0:
            raise InvalidInputError("eta must be nonzero")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def radial(cls, eta_abs: float, r: float, dim: int) -> "EwaldSphere":
        eta = np.zeros(dim)
        eta[-1] = eta_abs
        return cls(eta, r)

    @property
    def dim(self) -> int:
        return self.eta.size

    @property
    def center(self) -> np.ndarray:
        return self.eta / 2

    @property
    def radius(self) -> float:
        return self.r * float(np.linalg.norm(self.eta)) / 2

    def area(self) -> float:
        return sphere_area(self.dim) * self.radius ** (self.dim - 1)

    def points(self, theta: np.ndarray) -> np.ndarray:
        return self.center + self.radius * theta


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, values) -> complex:
        return np.tensordot(self.weights, values, axes=(0, 0))


def quad_rule(dim: int, order: int) -> SphereQuadrature:
    """Product rule on the unit sphere.

    dim 2: ``order`` equispaced angles. dim 3: Gauss-Legendre of ``order``
    nodes in cos(polar angle) times ``2*order`` equispaced azimuths.
    """
    if order < 4:
        raise InvalidInputError("order must be at least 4")
    if dim == 2:
        ang = 2 * np.pi * np.arange(order) / order
        nodes = np.column_stack([np.cos(ang), np.sin(ang)])
        weights = np.full(order, 2 * np.pi / order)
    elif dim == 3:
        t, wt = gauss_legendre(order)
        m = 2 * order
        phi = 2 * np.pi * np.arange(m) / m
        T, P = np.meshgrid(t, phi, indexing="ij")
        S = np.sqrt(1 - T * T)
        nodes = np.column_stack([(S * np.cos(P)).ravel(), (S * np.sin(P)).ravel(), T.ravel()])
        weights = (wt[:, None] * np.full(m, 2 * np.pi / m)[None, :]).ravel()
    else:
        raise InvalidInputError(f"unsupported dimension {dim}")
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SphereQuadrature(dim, nodes, weights, order)


def rotation_to(axis: np.ndarray) -> np.ndarray:
    """Orthogonal matrix sending the last coordinate axis to ``axis / |axis|``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    n = a.size
    e = np.zeros(n)
    e[-1] = 1.0
    M = np.column_stack([a, np.eye(n)[:, :-1]])
    Q, _ = np.linalg.qr(M)
    if Q[:, 0] @ a < 0:
        Q[:, 0] = -Q[:, 0]
    # Q[:, 0] = a; reorder so that the last column carries a
    R = np.column_stack([Q[:, 1:], Q[:, 0]])
    if np.linalg.det(R) < 0:
        R[:, 0] = -R[:, 0]
    return R


def integrate_ewald(sph: EwaldSphere, integrand, quad: SphereQuadrature, *, align=True) -> complex:
    """Surface integral of ``integrand`` over Gamma_r(eta).

    ``integrand`` maps an (m, n) array of points to m values. With ``align``
    the rule's polar axis is rotated onto eta.
    """
    if quad.dim != sph.dim:
        raise InvalidInputError("quadrature dimension does not match the sphere")
    theta = quad.nodes @ rotation_to(sph.eta).T if align else quad.nodes
    vals = np.asarray(integrand(sph.points(theta)))
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("integrand is not finite on the sphere")
    return quad.integrate(vals) * sph.radius ** (sph.dim - 1)


def _polar_integral(func, dim, breaks, order, singular_power=None):
    """Integral over S^(n-1) of a zonal function given as func(psi).

    With ``singular_power`` the first panel uses Gauss-Jacobi nodes for the
    weight psi^singular_power.
    """
    omega = sphere_area(dim - 1)
    x, w = composite_rule(breaks[1:] if singular_power is not None else breaks, order)
    total = np.sum(w * func(x) * np.sin(x) ** (dim - 2))
    if singular_power is not None:
        h = breaks[1]
        xj, wj = roots_jacobi(order, 0.0, singular_power)
        psi = 0.5 * h * (xj + 1)
        wj = wj * (0.5 * h) ** (1 + singular_power)
        smooth = func(psi) * np.sin(psi) ** (dim - 2) / psi ** singular_power
        total += np.sum(wj * smooth)
    return omega * total


def singular_sphere_integral(lam, rho, x, *, order=16, min_width=None):
    """int_{S_rho} |x - y|^(-(n-1)+2 lam) dsigma(y) for the sphere centered at 0."""
    x = np.asarray(x, dtype=float)
    n = x.size
    p = -(n - 1) + 2 * lam
    d = float(np.linalg.norm(x))
    gap = abs(d - rho) / rho
    if gap < 1e-14:
        # exactly on the sphere: |x-y| = 2 rho sin(psi/2), weight psi^(2 lam - 1)
        def func(psi):
            return (2 * rho * np.sin(psi / 2)) ** p

        width = min_width or 1e-2
        breaks = graded_breaks(0.0, np.pi, width, "a")
        val = _polar_integral(func, n, breaks, order, singular_power=p + n - 2)
    else:
        def func(psi):
            return (d * d + rho * rho - 2 * d * rho * np.cos(psi)) ** (p / 2)

        width = min_width or max(0.25 * gap, 1e-14)
        breaks = graded_breaks(0.0, np.pi, width, "a")
        val = _polar_integral(func, n, breaks, order)
    return val * rho ** (n - 1)


def check_singular_bound(lam, rho, x, *, order=16, rtol=0.01):
    """Ratio int_{S_rho}|x-y|^(-(n-1)+2 lam) dsigma / rho^(2 lam).

    The ratio is evaluated at two refinement levels; disagreement above
    ``rtol`` raises ConvergenceError.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n not in (2, 3):
        raise InvalidInputError("dimension must be 2 or 3")
    if not (0 < lam <= (n - 1) / 2):
        raise InvalidInputError("lambda must lie in (0, (n-1)/2]")
    if not rho > 0:
        raise InvalidInputError("rho must be positive")
    coarse = singular_sphere_integral(lam, rho, x, order=order)
    fine = singular_sphere_integral(lam, rho, x, order=2 * order)
    if not np.isfinite(fine) or abs(fine - coarse) > rtol * abs(fine):
        raise ConvergenceError(
            "singular sphere integral did not converge under refinement",
            coarse=float(coarse),
            fine=float(fine),
        )
    return float(fine / rho ** (2 * lam))


@dataclass(frozen=True)
class GaussianMixture:
    """f(x) = sum_k c_k exp(-|x - mu_k|^2 / (2 s_k^2)), with closed-form H^1 norms."""

    coeffs: np.ndarray
    centers: np.ndarray
    widths: np.ndarray

    @classmethod
    def random(cls, rng, dim, terms=3):
        return cls(
            rng.normal(size=terms),
            rng.normal(scale=1.5, size=(terms, dim)),
            rng.uniform(0.3, 1.5, size=terms),
        )

    def __call__(self, pts):
        pts = np.atleast_2d(pts)
        d2 = np.sum((pts[:, None, :] - self.centers[None, :, :]) ** 2, axis=-1)
        return np.exp(-d2 / (2 * self.widths ** 2)) @ self.coeffs

    def gradient(self, pts):
        pts = np.atleast_2d(pts)
        diff = pts[:, None, :] - self.centers[None, :, :]
        d2 = np.sum(diff ** 2, axis=-1)
        g = np.exp(-d2 / (2 * self.widths ** 2)) * self.coeffs / self.widths ** 2
        return -np.einsum("mk,mkd->md", g, diff)

    def _pair_integrals(self):
        n = self.centers.shape[1]
        s2 = self.widths[:, None] ** 2
        t2 = self.widths[None, :] ** 2
        v = s2 * t2 / (s2 + t2)
        a = self.centers[:, None, :]
        b = self.centers[None, :, :]
        dab = np.sum((a - b) ** 2, axis=-1)
        K = np.exp(-dab / (2 * (s2 + t2))) * (2 * np.pi * v) ** (n / 2)
        m = (t2[..., None] * a + s2[..., None] * b) / (s2 + t2)[..., None]
        dot = np.sum((m - a) * (m - b), axis=-1)
        grad = K * (n * v + dot) / (s2 * t2)
        c = np.outer(self.coeffs, self.coeffs)
        return float(np.sum(c * K)), float(np.sum(c * grad))

    def l2_norm_sq(self) -> float:
        return self._pair_integrals()[0]

    def grad_l2_norm_sq(self) -> float:
        return self._pair_integrals()[1]


def check_trace(f, center, radius, quad: SphereQuadrature):
    """(lhs, rhs) with lhs = int_S |f|^2 and rhs = ||f||^2 + ||grad f||^2.

    ``f`` must provide ``__call__`` on (m, n) points plus ``l2_norm_sq`` and
    ``grad_l2_norm_sq`` (as GaussianMixture does).
    """
    center = np.asarray(center, dtype=float)
    pts = center + radius * quad.nodes
    lhs = float(quad.integrate(np.abs(f(pts)) ** 2) * radius ** (quad.dim - 1))
    rhs = f.l2_norm_sq() + f.grad_l2_norm_sq()
    return lhs, rhs
