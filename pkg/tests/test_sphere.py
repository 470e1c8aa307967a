import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from backscatter.errors import InvalidInputError
from backscatter.fields import CartesianGrid, Field, sobolev_norm
from backscatter.sphere import (
    EwaldSphere,
    GaussianMixture,
    check_singular_bound,
    check_trace,
    integrate_ewald,
    quad_rule,
    rotation_to,
    singular_sphere_integral,
    sphere_area,
)
from backscatter.verify import singular_sup


def test_sphere_area_values():
    assert sphere_area(2) == pytest.approx(2 * np.pi)
    assert sphere_area(3) == pytest.approx(4 * np.pi)
    assert sphere_area(4) == pytest.approx(2 * np.pi**2)


def test_ewald_sphere_geometry():
    s = EwaldSphere(np.array([0.0, 0.0, 4.0]), 0.5)
    assert_allclose(s.center, [0, 0, 2])
    assert s.radius == pytest.approx(1.0)
    assert s.area() == pytest.approx(4 * np.pi)
    with pytest.raises(InvalidInputError):
        EwaldSphere(np.zeros(3), 1.0)
    with pytest.raises(InvalidInputError):
        EwaldSphere(np.ones(3), 0.0)


@pytest.mark.parametrize("dim", [2, 3])
def test_quadrature_weights_and_moments(dim):
    q = quad_rule(dim, 16)
    assert q.weights.sum() == pytest.approx(sphere_area(dim), rel=1e-14)
    # int theta_1^2 over the sphere is area / n
    assert q.integrate(q.nodes[:, 0] ** 2) == pytest.approx(sphere_area(dim) / dim, rel=1e-13)
    assert abs(q.integrate(q.nodes[:, -1] ** 3)) < 1e-13


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), dim=st.sampled_from([2, 3]))
def test_rotation_sends_last_axis_to_eta(seed, dim):
    v = np.random.default_rng(seed).normal(size=dim)
    R = rotation_to(v)
    assert_allclose(R @ R.T, np.eye(dim), atol=1e-13)
    assert np.linalg.det(R) == pytest.approx(1.0)
    assert_allclose(R[:, -1], v / np.linalg.norm(v), atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    dim=st.sampled_from([2, 3]),
    r=st.floats(0.05, 5.0),
    scale=st.floats(0.1, 50.0),
)
def test_constancy_on_ewald_sphere(seed, dim, r, scale):
    eta = np.random.default_rng(seed).normal(size=dim)
    eta *= scale / np.linalg.norm(eta)
    sph = EwaldSphere(eta, r)
    q = quad_rule(dim, 12)
    pts = sph.points(q.nodes)
    vals = np.sum(pts**2, axis=1) + np.sum((eta - pts) ** 2, axis=1)
    assert_allclose(vals, (1 + r * r) * scale**2 / 2, rtol=1e-12)
    area = integrate_ewald(sph, lambda x: np.ones(len(x)), q)
    assert area.real == pytest.approx(sph.area(), rel=1e-12)


def test_singular_integral_at_center_is_exact():
    # at x = 0 every point is at distance rho: ratio = omega_{n-1}
    for dim in (2, 3):
        x = np.zeros(dim)
        assert check_singular_bound(0.4, 1.7, x) == pytest.approx(sphere_area(dim), rel=1e-12)


@pytest.mark.parametrize("dim,lam", [(2, 0.25), (2, 0.5), (3, 0.3), (3, 1.0)])
def test_singular_integral_on_sphere_matches_closed_form(dim, lam):
    x = np.zeros(dim)
    x[0] = 2.0
    ratio = singular_sphere_integral(lam, 2.0, x) / 2.0 ** (2 * lam)
    p = 2 * lam - (dim - 1)
    if dim == 2:
        from scipy.special import gamma

        exact = 2 * np.pi * gamma(p + 1) / gamma(p / 2 + 1) ** 2
    else:
        exact = 2 * np.pi * 2 ** (p + 1) / (p / 2 + 1)
    assert ratio == pytest.approx(exact, rel=1e-9)
    assert ratio <= singular_sup(dim, lam) * (1 + 1e-12)


def test_singular_bound_rejects_bad_lambda():
    with pytest.raises(InvalidInputError):
        check_singular_bound(1.5, 1.0, np.zeros(3) + 0.1)
    with pytest.raises(InvalidInputError):
        check_singular_bound(0.0, 1.0, np.zeros(2))


def test_gaussian_mixture_norms_against_grid():
    rng = np.random.default_rng(3)
    f = GaussianMixture.random(rng, 2, terms=3)
    grid = CartesianGrid(2, 10.0, 256)
    x, y = grid.coordinates()
    pts = np.column_stack([x.ravel(), y.ravel()])
    field = Field(grid, f(pts).reshape(grid.shape))
    h1_sq = sobolev_norm(field, 1.0) ** 2
    assert f.l2_norm_sq() == pytest.approx(field.l2_norm() ** 2, rel=1e-10)
    assert f.l2_norm_sq() + f.grad_l2_norm_sq() == pytest.approx(h1_sq, rel=1e-10)


def test_gaussian_mixture_gradient_is_consistent():
    f = GaussianMixture.random(np.random.default_rng(5), 3, terms=2)
    p = np.array([[0.3, -0.2, 0.5]])
    h = 1e-6
    fd = [(f(p + h * e) - f(p - h * e))[0] / (2 * h) for e in np.eye(3)]
    assert_allclose(f.gradient(p)[0], fd, rtol=1e-6, atol=1e-9)


def test_trace_inequality_holds_for_a_concentrated_mixture():
    f = GaussianMixture(np.array([1.0]), np.array([[1.0, 0.0, 0.0]]), np.array([0.2]))
    lhs, rhs = check_trace(f, np.zeros(3), 1.0, quad_rule(3, 64))
    assert 0 < lhs <= rhs
