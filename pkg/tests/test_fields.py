import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from backscatter.errors import ExtrapolationError, FitWindowError, InvalidInputError
from backscatter.fields import (
    CartesianGrid,
    Field,
    GridSpec1D,
    RadialProfile,
    SpectralField,
    bracket,
    fit_decay,
    forward_transform,
    fractional_laplacian,
    inverse_transform,
    load_field,
    radial_average,
    save_field,
    sobolev_norm,
)


@pytest.fixture
def gauss2():
    grid = CartesianGrid(2, 8.0, 64)
    return Field.from_function(grid, lambda x, y: np.exp(-(x * x + y * y) / 2))


def test_gaussian_transform_matches_closed_form(gauss2):
    # int exp(-|x|^2/2) e^{-i x.xi} dx = 2 pi exp(-|xi|^2/2)
    F = forward_transform(gauss2)
    expected = 2 * np.pi * np.exp(-gauss2.grid.frequency_radius() ** 2 / 2)
    assert_allclose(F.samples, expected, atol=1e-12)


def test_dual_spacing_is_pi_over_half_extent():
    g = CartesianGrid(3, 2.5, 16)
    assert g.dual_spacing == pytest.approx(np.pi / 2.5)
    assert g.nyquist == pytest.approx(8 * np.pi / 2.5)
    assert g.axis()[8] == 0.0 and g.frequency_axis()[8] == 0.0


def test_sobolev_norm_of_gaussian(gauss2):
    # ||f||^2 = pi, ||<D> f||^2 = 2 pi for f = exp(-|x|^2/2) in the plane
    assert sobolev_norm(gauss2, 0.0) == pytest.approx(np.sqrt(np.pi), rel=1e-12)
    assert sobolev_norm(gauss2, 1.0) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
    assert gauss2.l2_norm() == pytest.approx(np.sqrt(np.pi), rel=1e-12)


def test_fractional_laplacian_order_two_is_minus_laplacian(gauss2):
    x, y = gauss2.grid.coordinates()
    r2 = x * x + y * y
    lap = fractional_laplacian(gauss2, 2.0)
    assert_allclose(lap.samples.real, (2 - r2) * np.exp(-r2 / 2), atol=1e-10)
    assert fractional_laplacian(gauss2, 0.0) is gauss2
    with pytest.raises(InvalidInputError):
        fractional_laplacian(gauss2, -1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), dim=st.sampled_from([2, 3]))
def test_parseval_and_round_trip(seed, dim):
    rng = np.random.default_rng(seed)
    grid = CartesianGrid(dim, 3.0, 16 if dim == 2 else 8)
    f = Field(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))
    F = forward_transform(f)
    assert F.l2_norm() == pytest.approx(f.l2_norm(), rel=1e-12)
    assert_allclose(inverse_transform(F).samples, f.samples, atol=1e-12)


def test_radial_average_of_radial_spectrum():
    grid = CartesianGrid(2, 4.0, 64)
    F = SpectralField.from_radial(grid, lambda k: bracket(k) ** -3)
    prof = radial_average(F)
    # shells are rings of lattice points; at shell k their radii are within half a spacing of k*dk
    assert prof.rho[0] == 0.0 and prof.values[0] == pytest.approx(1.0)
    dk = grid.dual_spacing
    k = 10
    i = int(np.argmin(np.abs(prof.rho - k * dk)))
    lo, hi = bracket((k + 0.5) * dk) ** -3, bracket((k - 0.5) * dk) ** -3
    assert lo <= prof.values[i].real <= hi


def test_profile_spline_refuses_extrapolation():
    rho = np.linspace(0, 4, 41)
    p = RadialProfile(rho, np.exp(-rho))
    assert p(2.0) == pytest.approx(np.exp(-2.0), rel=1e-5)
    assert p.derivative(2.0) == pytest.approx(-np.exp(-2.0), rel=1e-3)
    with pytest.raises(ExtrapolationError):
        p(4.5)


def test_profile_validation():
    with pytest.raises(InvalidInputError):
        RadialProfile([0.0, 1.0, 1.0], [1, 2, 3])
    with pytest.raises(InvalidInputError):
        RadialProfile([0.0, 1.0], [1.0, np.nan])
    with pytest.raises(InvalidInputError):
        GridSpec1D(0.0, 1.0, 4, "logarithmic")


def test_profile_csv_round_trip(tmp_path):
    rho = np.linspace(0, 3, 7)
    p = RadialProfile(rho, np.exp(-rho) + 1j * rho)
    path = tmp_path / "p.csv"
    p.to_csv(path)
    q = RadialProfile.from_csv(path)
    assert_allclose(q.rho, p.rho, rtol=0, atol=0)
    assert_allclose(q.values, p.values, rtol=0, atol=0)


def test_profile_scaling_and_sum():
    a = RadialProfile.analytic(lambda r: np.exp(-r), lambda r: -np.exp(-r))
    b = RadialProfile.analytic(lambda r: 1 / (1 + r))
    s = a.scaled(2.0) + b
    assert s(1.0) == pytest.approx(2 * np.exp(-1) + 0.5)
    with pytest.raises(InvalidInputError):
        a + RadialProfile(np.linspace(0, 1, 3), np.ones(3))


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0.5, 6.0), c=st.floats(0.1, 10.0))
def test_fit_decay_recovers_bracket_power(s, c):
    rho = np.geomspace(8, 128, 32)
    fit = fit_decay(c * bracket(rho) ** -s, (8, 128), rho=rho)
    assert fit.exponent == pytest.approx(s, abs=1e-10)
    assert fit.log_amplitude == pytest.approx(np.log(c), abs=1e-9)
    assert fit.residual_rms < 1e-10


def test_fit_decay_window_errors():
    rho = np.geomspace(1, 100, 20)
    with pytest.raises(FitWindowError):
        fit_decay(rho**-2, (50, 100), rho=rho)
    with pytest.raises(FitWindowError):
        fit_decay(np.zeros_like(rho), (1, 100), rho=rho)
    with pytest.raises(FitWindowError):
        fit_decay(rho**-2, (10, 5), rho=rho)


def test_field_file_round_trip(tmp_path, gauss2):
    path = tmp_path / "f.bin"
    F = forward_transform(gauss2)
    save_field(F, path)
    G = load_field(path)
    assert isinstance(G, SpectralField)
    assert G.grid == F.grid
    assert np.array_equal(G.samples, F.samples)
