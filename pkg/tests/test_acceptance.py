"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed together in the
terminal summary (and immediately when pytest runs with -s).
"""

import itertools

import numpy as np
import pytest

from backscatter.born import CutoffSpec, born_approx, q2_hat, q3_hat
from backscatter.dispersion import dispersion_family, ds_r, gaussian_ds_r, gaussian_s_r, s_r
from backscatter.fields import GridSpec1D
from backscatter.potentials import bessel_spectrum, check_g_beta, default_g_beta_setup, gaussian_spectrum, make_g_beta
from backscatter.pv import NEAR_SCHEMES, Family, PVScheme, pv_part, reference_pv
from backscatter.regularity import bound_table, counterexample_experiment, m_value, smoothing_check
from backscatter.verify import run_suites

from conftest import ACCEPTANCE_LINES


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert ok, line


def test_criterion_1_gaussian_dispersion_oracle():
    worst = 0.0
    for n, r, eta in itertools.product((2, 3), (0.5, 1.0, 2.0), (1.0, 2.0, 8.0)):
        exact = gaussian_s_r(1.0, eta, r, n)
        worst = max(worst, abs(s_r(gaussian_spectrum(1.0), eta, r, n) - exact) / exact)
    record(1, worst < 1e-8, f"max relative error {worst:.2e} (tolerance 1e-8)")


def test_criterion_2_derivative_oracle():
    worst_closed = 0.0
    ratios = []
    improvement = np.inf
    cases = [(gaussian_spectrum(1.0), 2.0), (bessel_spectrum(1.0, 2), 6.0), (bessel_spectrum(0.5, 3), 6.0)]
    for n, r in itertools.product((2, 3), (0.5, 1.0, 2.0)):
        for eta in (1.0, 2.0, 8.0):
            exact = gaussian_ds_r(1.0, eta, r, n)
            val = ds_r(gaussian_spectrum(1.0), eta, r, n)
            worst_closed = max(worst_closed, abs(val - exact) / abs(exact))
        for q, eta in cases:
            if q.name.startswith("bessel") and f"n={n}" not in q.name:
                continue
            d = ds_r(q, eta, r, n)
            h = 0.02 * r
            cd = [(s_r(q, eta, r + k, n) - s_r(q, eta, r - k, n)) / (2 * k) for k in (h, h / 2)]
            e1, e2 = abs(cd[0] - d), abs(cd[1] - d)
            ratios.append(e1 / e2)
            # extrapolation removes the h^2 term, so it must beat the finer difference
            improvement = min(improvement, e2 / abs((4 * cd[1] - cd[0]) / 3 - d))
    ok = worst_closed < 1e-8 and all(3.6 < x < 4.4 for x in ratios) and improvement > 10
    record(
        2,
        ok,
        f"closed-form error {worst_closed:.2e}; centered-difference error ratios "
        f"{min(ratios):.3f}-{max(ratios):.3f} (h^2 gives 4); Richardson gains at least {improvement:.0f}x",
    )


def test_criterion_3_pv_oracle():
    families = {
        "cancel": Family(lambda r: (1 - r) * np.exp(-r)),
        "step": Family(lambda r: np.where(r < 2, 1.0, 0.0), breakpoints=(2.0,)),
        "gaussian dispersion": dispersion_family(gaussian_spectrum(1.0), 2.0, 2),
    }
    worst = {}
    for name, fam in families.items():
        ref = reference_pv(fam, method="symmetric_pair")
        # the step family integrates to zero; its error is measured against max |F| = 1
        scale = 1.0 if name == "step" else abs(ref)
        worst[name] = max(abs(pv_part(fam, PVScheme(near_scheme=s)) - ref) / scale for s in NEAR_SCHEMES)
    ok = all(v <= 1e-6 for v in worst.values())
    record(3, ok, "relative errors " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (tolerance 1e-6)")


def test_criterion_4_g_beta_spectrum():
    details = []
    ok = True
    for n, beta in ((2, 1.0), (3, 0.5), (3, 1.5)):
        grid, scale = default_g_beta_setup(n)
        _, spec = make_g_beta(beta, scale, grid, allow_large=True)
        rep = check_g_beta(beta, spec, window=(8.0, 128.0), tol=0.05)
        ok &= abs(rep["fitted_exponent"] - (n / 2 + beta)) <= 0.05 and rep["min_over_max"] >= -1e-10
        details.append(f"({n},{beta}) e={rep['fitted_exponent']:.4f} min/max={rep['min_over_max']:.1e}")
        del spec
    record(4, ok, "; ".join(details) + " (target n/2+beta within 0.05)")


@pytest.fixture(scope="module")
def eta_sweep():
    return GridSpec1D(4.0, 512.0, 48, "logarithmic")


def test_criterion_5_counterexample_exponents(eta_sweep):
    details = []
    ok = True
    for n, beta in ((2, 1.0), (3, 0.5), (3, 1.0)):
        report, _ = counterexample_experiment(n, beta, eta_sweep, window=(8.0, 512.0), with_q2=False)
        e = report.entries[0]
        ok &= bool(e["pass"])
        details.append(f"({n},{beta}) e={e['fitted']:.3f} p={e['predicted']:g} margin={e['margin']:.3f}")
    # p = min(beta + n/2 + 1, 2 beta + 2) is 3.5 at (3, 1); the criterion's listed 4 is looser
    record(5, ok, "; ".join(details) + " (e <= p + 0.1)")


def test_criterion_6_q2_structure():
    worst_im = 0.0
    for n, beta in ((2, 1.0), (3, 0.5)):
        q = bessel_spectrum(beta, n)
        for eta in np.geomspace(4, 256, 7):
            s1 = s_r(q, eta, 1.0, n)
            worst_im = max(worst_im, abs(q2_hat(q, eta, n).imag - np.pi * s1) / (np.pi * s1))
    q = bessel_spectrum(1.0, 2)
    g = gaussian_spectrum(1.0)
    worst_scale = 0.0
    base2 = q2_hat(q, 16.0, 2)
    base3 = q3_hat(g, 2.0, 2)
    for lam in (0.5, 2.0):
        worst_scale = max(worst_scale, abs(q2_hat(q.scaled(lam), 16.0, 2) - lam**2 * base2) / abs(lam**2 * base2))
        worst_scale = max(worst_scale, abs(q3_hat(g.scaled(lam), 2.0, 2) - lam**3 * base3) / abs(lam**3 * base3))
    ok = worst_im <= 1e-10 and worst_scale <= 1e-12
    record(6, ok, f"Im Q2 vs pi S_1 {worst_im:.1e} (1e-10); scaling j=2,3 {worst_scale:.1e} (1e-12)")


def test_criterion_7_smoothing(eta_sweep):
    res = born_approx(bessel_spectrum(1.0, 2), 2, CutoffSpec(4.0), 2, eta_sweep)
    entry = smoothing_check(res, 1.0, 2, window=(16.0, 512.0))
    ok = entry["fitted"] >= 0.5 and entry["pass"]
    record(7, ok, f"gain {entry['fitted']:.3f} (need >= 0.5; theory 1)")


def test_criterion_8_property_suites():
    results = run_suites(["parseval", "sphere", "trace", "singular", "polarization"], seed=0)
    ok = all(r.passed for r in results)
    summary = ", ".join(f"{r.name} {r.cases}/{len(r.failures)}" for r in results)
    record(8, ok, f"checks/failures: {summary}")


def test_criterion_9_bound_tables():
    gain_caps = {bound_table(2, b).teo_main2_alpha_sup - b for b in (0.5, 1.0, 2.0, 7.25)}
    checks = [
        m_value(4) == 2 / 5,
        bound_table(4, 0.5).teo_q2count_alpha_max == 1,
        gain_caps == {1.0},
    ]
    record(9, all(checks), f"m(4)={m_value(4)!r}, Q2count(4,0.5)={bound_table(4, 0.5).teo_q2count_alpha_max!r}, "
                           f"n=2 gain caps {sorted(gain_caps)}")
