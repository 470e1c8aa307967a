import numpy as np
import pytest
from numpy.testing import assert_allclose

from backscatter.errors import InvalidInputError, ResolutionError
from backscatter.fields import CartesianGrid, RadialProfile, bracket, forward_transform
from backscatter.potentials import (
    PotentialSpec,
    bessel_spectrum,
    bump,
    bump_autoconv,
    check_g_beta,
    default_g_beta_setup,
    gaussian_spectrum,
    make_bump,
    make_g_beta,
)


def test_bessel_spectrum_values_and_derivative():
    p = bessel_spectrum(1.0, 2)
    assert_allclose(p(np.array([0.0, 1.0, 3.0])), [1.0, 0.5, 0.1])
    rho = np.linspace(0.5, 20, 50)
    h = 1e-5
    fd = (p(rho + h) - p(rho - h)) / (2 * h)
    assert_allclose(p.derivative(rho), fd, rtol=1e-7)
    fine = np.linspace(0, 8, 801)
    sampled = RadialProfile(fine, p(fine), p.derivative(fine))
    assert sampled.check_derivative_consistency() < 1e-3
    with pytest.raises(InvalidInputError):
        RadialProfile(fine, p(fine), -p.derivative(fine)).check_derivative_consistency()


def test_gaussian_spectrum_length_scale():
    p = gaussian_spectrum(4.0)
    assert p.length_scale == pytest.approx(0.5)
    assert p(0.5) == pytest.approx(np.exp(-1.0))
    assert p.derivative(0.5) == pytest.approx(-4.0 * np.exp(-1.0))


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_invalid_parameters(bad):
    with pytest.raises(InvalidInputError):
        bessel_spectrum(bad, 2)
    with pytest.raises(InvalidInputError):
        gaussian_spectrum(bad)


def test_bump_support_and_peak():
    r = np.array([0.0, 0.5, 0.999, 1.0, 2.0])
    v = bump(r, 1.0)
    assert v[0] == pytest.approx(np.exp(-1.0))
    assert np.all(v[3:] == 0) and v[2] > 0


def test_autoconvolution_has_nonnegative_spectrum():
    grid = CartesianGrid(2, 4.0, 128)
    psi = bump_autoconv(make_bump(1.0, grid))
    F = forward_transform(psi).samples
    assert np.max(np.abs(F.imag)) < 1e-12 * np.max(np.abs(F))
    assert F.real.min() >= -1e-12 * F.real.max()
    assert np.all(psi.samples[grid.radius() > 2.0 + grid.spacing] == 0)


def test_autoconvolution_refuses_wraparound():
    grid = CartesianGrid(2, 4.0, 64)
    with pytest.raises(InvalidInputError):
        bump_autoconv(make_bump(2.5, grid))


def test_three_dimensional_grid_cap():
    with pytest.raises(InvalidInputError):
        make_g_beta(0.5, 1.0, CartesianGrid(3, 2.5, 256))


def test_g_beta_two_dimensions():
    grid, scale = default_g_beta_setup(2)
    g, spec = make_g_beta(1.0, scale, grid)
    report = check_g_beta(1.0, spec)
    assert abs(report["fitted_exponent"] - 2.0) <= 0.05
    assert report["min_over_max"] >= -1e-10
    # compact support: g vanishes where the bump autoconvolution does
    assert np.all(g.samples[grid.radius() > 2 * scale + grid.spacing] == 0)


def test_g_beta_under_resolved_window():
    grid = CartesianGrid(2, 4.0, 64)
    _, spec = make_g_beta(1.0, 1.0, grid)
    with pytest.raises(ResolutionError):
        check_g_beta(1.0, spec)


def test_potential_spec():
    p = PotentialSpec("bessel_power", 3, {"beta": 0.5}).spectrum_profile()
    assert p(2.0) == pytest.approx(bracket(2.0) ** -2)
    with pytest.raises(InvalidInputError):
        PotentialSpec("bessel_power", 3, {})
    with pytest.raises(InvalidInputError):
        PotentialSpec("yukawa", 3)
