import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expi

from backscatter.dispersion import dispersion_family
from backscatter.errors import ConvergenceError, InvalidInputError, TruncationError
from backscatter.potentials import bessel_spectrum, gaussian_spectrum
from backscatter.pv import (
    NEAR_SCHEMES,
    Family,
    PVScheme,
    apply_dispersion_pv,
    delta_part,
    pv_integrate,
    pv_part,
    reference_pv,
)

# P of the Gaussian dispersion family at |eta| = 2, n = 2; both QUADPACK
# routes (symmetric pair and weighted Cauchy) agree with it to 4e-16
GAUSSIAN_P = 0.2850680150798027


def exp_family():
    return Family(lambda r: np.exp(-r))


@pytest.mark.parametrize("scheme", NEAR_SCHEMES)
class TestClosedForms:
    def test_cancelling_family(self, scheme):
        fam = Family(lambda r: (1 - r) * np.exp(-r))
        assert pv_part(fam, PVScheme(near_scheme=scheme)) == pytest.approx(1.0, abs=1e-12)

    def test_exponential(self, scheme):
        # pv int e^-r / (1 - r) = Ei(1) / e
        res = pv_integrate(exp_family(), PVScheme(near_scheme=scheme))
        assert res.value == pytest.approx(expi(1.0) / np.e, abs=1e-12)
        assert res.error_estimate < 1e-10

    def test_algebraic_tail(self, scheme):
        # partial fractions give pi/4; the r^-2 tail is bounded, not resolved
        res = pv_integrate(Family(lambda r: 1 / (1 + r * r)), PVScheme(near_scheme=scheme))
        assert abs(res.value - np.pi / 4) <= res.error_estimate
        assert res.error_estimate < 1e-5
        assert res.tail_exponent == pytest.approx(2.0, abs=0.01)

    def test_symmetric_step(self, scheme):
        fam = Family(lambda r: np.where(r < 2, 1.0, 0.0), breakpoints=(2.0,))
        assert pv_part(fam, PVScheme(near_scheme=scheme)) == pytest.approx(0.0, abs=1e-12)

    def test_gaussian_dispersion_family(self, scheme):
        fam = dispersion_family(gaussian_spectrum(1.0), 2.0, 2)
        assert pv_part(fam, PVScheme(near_scheme=scheme)) == pytest.approx(GAUSSIAN_P, rel=1e-12)


@pytest.mark.parametrize("method", ["symmetric_pair", "cauchy"])
def test_reference_routes(method):
    assert reference_pv(exp_family(), method=method) == pytest.approx(expi(1.0) / np.e, rel=1e-10)
    fam = dispersion_family(gaussian_spectrum(1.0), 2.0, 2)
    assert reference_pv(fam, method=method) == pytest.approx(GAUSSIAN_P, rel=1e-10)


@pytest.mark.parametrize("eta", [4.0, 64.0, 512.0])
def test_bessel_families_agree_with_reference(eta):
    fam = dispersion_family(bessel_spectrum(1.0, 2), eta, 2)
    ref = reference_pv(fam)
    for scheme in NEAR_SCHEMES:
        assert pv_part(fam, PVScheme(near_scheme=scheme)) == pytest.approx(ref, rel=1e-8)


def test_refinement_is_consistent():
    fam = dispersion_family(bessel_spectrum(0.5, 3), 32.0, 3)
    base = pv_integrate(fam)
    finer = pv_integrate(fam, PVScheme(subdivisions=2))
    assert abs(finer.value - base.value) <= base.error_estimate + 1e-14


def test_dispersion_operator_adds_delta_part():
    fam = dispersion_family(gaussian_spectrum(1.0), 2.0, 2)
    total = apply_dispersion_pv(fam)
    assert total.real == pytest.approx(GAUSSIAN_P, rel=1e-12)
    assert total.imag == pytest.approx(np.pi * delta_part(fam).real, rel=1e-14)


def test_jump_at_singularity_is_refused():
    fam = Family(lambda r: np.where(r < 1, 1.0, 2.0))
    with pytest.raises(ConvergenceError) as info:
        pv_integrate(fam)
    assert info.value.details["reflected_difference_ratio"] > 1.5


def test_holder_cusp_is_refused():
    fam = Family(lambda r: np.sign(r - 1) * np.abs(r - 1) ** 0.2 * np.exp(-r))
    with pytest.raises(ConvergenceError):
        pv_integrate(fam)


def test_non_decaying_family_is_refused():
    with pytest.raises(TruncationError):
        pv_integrate(Family(lambda r: np.ones_like(r)))
    with pytest.raises(TruncationError):
        pv_integrate(Family(lambda r: 1 / (1 + r)), PVScheme(r_max=8.0))


def test_scheme_validation():
    with pytest.raises(InvalidInputError):
        PVScheme(delta=1.5)
    with pytest.raises(InvalidInputError):
        PVScheme(near_scheme="midpoint")
    with pytest.raises(InvalidInputError):
        pv_integrate(Family(np.exp, breakpoints=(1.2,)))


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), s=st.floats(0.3, 3.0))
def test_linearity(a, b, s):
    F = Family(lambda r: np.exp(-s * r))
    G = Family(lambda r: r * np.exp(-r * r))
    combo = Family(lambda r: a * F(r) + b * G(r))
    expected = a * pv_part(F) + b * pv_part(G)
    assert pv_part(combo) == pytest.approx(expected, abs=1e-12 * (1 + abs(a) + abs(b)))


@settings(max_examples=20, deadline=None)
@given(k=st.integers(1, 6))
def test_positive_family_below_singularity_gives_positive_value(k):
    fam = Family(lambda r: np.where(r < 1, r * (1 - r) ** k, 0.0))
    assert pv_part(fam).real > 0
