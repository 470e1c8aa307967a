"""Test potentials: bumps, Bessel-kernel spectra, Gaussians and the g_beta family."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, ResolutionError
from .fields import (
    CartesianGrid,
    Field,
    GridSpec1D,
    RadialProfile,
    SpectralField,
    bracket,
    fit_decay,
    forward_transform,
    inverse_transform,
    radial_average,
)

# transform cost guard for n = 3 grids
MAX_POINTS_3D = 128

KINDS = ("gaussian", "bessel_power", "g_beta", "custom_sampled")


def bump(r, scale):
    """exp(-1 / (1 - (r/scale)^2)) inside r < scale, zero outside."""
    u = (np.asarray(r, dtype=float) / scale) ** 2
    inside = u < 1.0
    out = np.zeros_like(u)
    out[inside] = np.exp(-1.0 / (1.0 - u[inside]))
    return out


def make_bump(scale: float, grid: CartesianGrid) -> Field:
    if not scale > 0:
        raise InvalidInputError("bump scale must be positive")
    if scale >= grid.half_extent:
        raise InvalidInputError("bump scale must be smaller than the grid half extent")
    return Field(grid, bump(grid.radius(), scale))


def bump_autoconv(phi: Field) -> Field:
    """phi * phi computed spectrally; its spectrum is phi^2 >= 0.

    The support radius doubles, so phi must occupy at most half of the box.
    """
    if not phi.is_real():
        raise InvalidInputError("bump must be real")
    g = phi.grid
    r = g.radius()
    nz = np.abs(phi.samples) > 0
    support = float(r[nz].max()) if np.any(nz) else 0.0
    if 2 * support > g.half_extent:
        raise InvalidInputError("autoconvolution would wrap around the periodic box")
    F = forward_transform(phi).samples
    psi = np.array(inverse_transform(SpectralField(g, F * F)).samples.real)
    psi[r > 2 * support + g.spacing] = 0.0
    return Field(g, psi)


def bessel_spectrum(beta: float, dim: int) -> RadialProfile:
    """Analytic profile <rho>^(-n/2 - beta) of the Bessel potential kernel."""
    if not beta > 0:
        raise InvalidInputError("beta must be positive")
    s = dim / 2 + beta

    def f(rho):
        return bracket(rho) ** (-s)

    def df(rho):
        rho = np.asarray(rho, dtype=float)
        return -s * rho * bracket(rho) ** (-s - 2)

    return RadialProfile.analytic(f, df, name=f"bessel(n={dim},beta={beta})")


def gaussian_spectrum(a: float) -> RadialProfile:
    """Analytic profile exp(-a rho^2) with its derivative."""
    if not a > 0:
        raise InvalidInputError("gaussian width parameter must be positive")

    def f(rho):
        rho = np.asarray(rho, dtype=float)
        return np.exp(-a * rho * rho)

    def df(rho):
        rho = np.asarray(rho, dtype=float)
        return -2 * a * rho * np.exp(-a * rho * rho)

    grid = GridSpec1D(0.0, 8.0 / np.sqrt(a), 257)
    return RadialProfile.analytic(f, df, grid=grid, length_scale=1 / np.sqrt(a), name=f"gaussian(a={a})")


def make_g_beta(beta, bump_scale, grid: CartesianGrid, *, allow_large=False):
    """Counterexample potential g_beta = (phi * phi) G_beta and its spectrum.

    G_beta is synthesised from its sampled spectrum <xi>^(-n/2-beta) on the
    dual grid, so the product is exact as a discrete circular convolution of
    the two spectra and g_beta vanishes wherever phi * phi does.
    """
    if not beta > 0:
        raise InvalidInputError("beta must be positive")
    if grid.dim == 3 and grid.points_per_axis > MAX_POINTS_3D and not allow_large:
        raise InvalidInputError(
            f"3-D grids above {MAX_POINTS_3D}^3 need allow_large=True"
        )
    phi = make_bump(bump_scale, grid)
    psi = bump_autoconv(phi)
    del phi
    kernel = SpectralField.from_radial(grid, lambda k: bracket(k) ** (-grid.dim / 2 - beta))
    G = inverse_transform(kernel).samples.real
    del kernel
    g = Field(grid, psi.samples.real * G)
    del G, psi
    return g, forward_transform(g)


def g_beta_profile(spectrum: SpectralField) -> RadialProfile:
    return radial_average(spectrum, name="g_beta shell average")


def check_g_beta(beta, spectrum: SpectralField, window=(8.0, 128.0), tol=0.05):
    """Positivity and decay diagnostics for a g_beta spectrum.

    Raises ResolutionError when the fitted exponent misses n/2 + beta by more
    than ``tol`` or the window runs past the Nyquist frequency.
    """
    n = spectrum.grid.dim
    if window[1] > spectrum.grid.nyquist:
        raise ResolutionError(
            "fit window extends beyond the grid Nyquist frequency",
            nyquist=spectrum.grid.nyquist,
        )
    s = spectrum.samples.real
    smax = float(s.max())
    profile = g_beta_profile(spectrum)
    fit = fit_decay(profile, window)
    target = n / 2 + beta
    report = {
        "target_exponent": target,
        "fitted_exponent": fit.exponent,
        "residual_rms": fit.residual_rms,
        "min_over_max": float(s.min() / smax),
        "value_at_origin": float(s[(spectrum.grid.points_per_axis // 2,) * n]),
        "window": list(window),
    }
    if abs(fit.exponent - target) > tol:
        raise ResolutionError(
            f"g_beta decay not asymptotic in window: fitted {fit.exponent:.4f}, expected {target:.4f}",
            **report,
        )
    return report


def default_g_beta_setup(dim: int):
    """Grid and bump scale that resolve the [8, 128] window (see README)."""
    if dim == 2:
        return CartesianGrid(2, 4.0, 512), 1.0
    if dim == 3:
        return CartesianGrid(3, 2.5, 256), 1.2
    raise InvalidInputError("dim must be 2 or 3")


@dataclass
class PotentialSpec:
    kind: str
    dim: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown potential kind {self.kind!r}")
        if self.dim < 2:
            raise InvalidInputError("dim must be at least 2")
        p = self.params
        if self.kind == "gaussian" and not p.get("a", 1.0) > 0:
            raise InvalidInputError("gaussian needs a > 0")
        if self.kind in ("bessel_power", "g_beta") and not p.get("beta", 0.0) > 0:
            raise InvalidInputError(f"{self.kind} needs beta > 0")
        if self.kind == "custom_sampled" and "path" not in p:
            raise InvalidInputError("custom_sampled needs a path")

    def spectrum_profile(self, grid: Optional[CartesianGrid] = None) -> RadialProfile:
        p = self.params
        if self.kind == "gaussian":
            return gaussian_spectrum(float(p.get("a", 1.0)))
        if self.kind == "bessel_power":
            return bessel_spectrum(float(p["beta"]), self.dim)
        if self.kind == "custom_sampled":
            return RadialProfile.from_csv(p["path"], name="custom")
        if grid is None:
            grid, scale = default_g_beta_setup(self.dim)
        else:
            scale = float(p.get("bump_scale", 1.0))
        _, spec = make_g_beta(float(p["beta"]), float(p.get("bump_scale", scale)), grid, allow_large=True)
        return g_beta_profile(spec)
