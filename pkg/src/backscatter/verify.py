"""Randomized property suites, deterministic for a fixed seed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .born import DEFAULT_Q3_SCHEME, polarization_check, q2_hat, q3_hat
from .dispersion import dispersion_family, s3_r, s_r
from .errors import NumericalDiagnostic
from .fields import (
    CartesianGrid,
    Field,
    RadialProfile,
    SpectralField,
    forward_transform,
    inverse_transform,
)
from .potentials import bessel_spectrum, gaussian_spectrum
from .pv import Family, PVScheme, apply_dispersion_pv, pv_part, reference_pv, NEAR_SCHEMES
from .sphere import (
    EwaldSphere,
    GaussianMixture,
    SphereQuadrature,
    check_singular_bound,
    check_trace,
    integrate_ewald,
    quad_rule,
    rotation_to,
    sphere_area,
)

FAULTS = ("corrupt-weights",)


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, ok, message):
        self.cases += 1
        if not ok:
            self.failures.append(message)

    def as_dict(self):
        return {
            "suite": self.name,
            "pass": self.passed,
            "cases": self.cases,
            "failures": self.failures[:20],
            "failure_count": len(self.failures),
            "metrics": self.metrics,
        }


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def suite_parseval(rng, cases=20, fault=None):
    res = SuiteResult("parseval")
    worst = 0.0
    for k in range(cases):
        dim = 2 if k % 2 == 0 else 3
        grid = CartesianGrid(dim, 4.0, 32 if dim == 2 else 16)
        kr = grid.frequency_radius()
        spec = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        spec = np.where(kr < 0.5 * grid.nyquist, spec, 0.0)
        f = inverse_transform(SpectralField(grid, spec))
        if k % 4 < 2:
            f = Field(grid, f.samples.real)
        F = forward_transform(f)
        err = _rel(f.l2_norm(), F.l2_norm())
        back = inverse_transform(F)
        rt = np.linalg.norm(back.samples - f.samples) / np.linalg.norm(f.samples)
        worst = max(worst, err, rt)
        res.check(err <= 1e-10, f"case {k}: Parseval mismatch {err:.2e}")
        res.check(rt <= 1e-10, f"case {k}: round trip error {rt:.2e}")
        if f.is_real():
            s = F.samples
            # the negative of centered index i is N - i; index 0 has no partner
            sl = tuple(slice(1, None) for _ in range(dim))
            inner = s[sl]
            flipped = np.conj(inner[tuple(slice(None, None, -1) for _ in range(dim))])
            herm = np.max(np.abs(inner - flipped)) / np.max(np.abs(s))
            res.check(herm <= 1e-12, f"case {k}: Hermitian symmetry off by {herm:.2e}")
    res.metrics["worst_relative_error"] = worst
    return res


def _maybe_corrupt(quad: SphereQuadrature, fault):
    if fault != "corrupt-weights":
        return quad
    w = quad.weights * (1 + 1e-6 * np.cos(np.arange(quad.weights.size)))
    return SphereQuadrature(quad.dim, quad.nodes, w, quad.order)


def suite_sphere(rng, cases=100, fault=None):
    res = SuiteResult("sphere")
    worst = 0.0
    rules = {d: _maybe_corrupt(quad_rule(d, 24), fault) for d in (2, 3)}
    for d, q in rules.items():
        err = _rel(q.weights.sum(), sphere_area(d))
        res.check(err <= 1e-12, f"dim {d}: weight sum off by {err:.2e}")
        norms = np.abs(np.linalg.norm(q.nodes, axis=1) - 1).max()
        res.check(norms <= 1e-14, f"dim {d}: nodes off the unit sphere by {norms:.2e}")
    for k in range(cases):
        dim = 2 + k % 2
        eta = rng.normal(size=dim) * rng.uniform(0.5, 8.0)
        r = rng.uniform(0.1, 3.0)
        sph = EwaldSphere(eta, r)
        quad = rules[dim]
        area = integrate_ewald(sph, lambda xi: np.ones(len(xi)), quad).real
        e1 = _rel(area, sph.area())
        const = (1 + r * r) * (eta @ eta) / 2
        e2 = _rel(
            integrate_ewald(sph, lambda xi: np.sum(xi**2, 1) + np.sum((eta - xi) ** 2, 1), quad).real,
            const * sph.area(),
        )
        # pointwise: the identity and the symmetry xi -> eta - xi at every node
        pts = sph.points(quad.nodes @ rotation_to(eta).T)
        vals = np.sum(pts**2, 1) + np.sum((eta - pts) ** 2, 1)
        e3 = np.max(np.abs(vals - const)) / const
        mirror = np.abs(np.linalg.norm(eta - pts - sph.center, axis=1) - sph.radius).max()
        e4 = mirror / max(1.0, sph.radius)
        worst = max(worst, e1, e2, e3)
        res.check(e1 <= 1e-12, f"case {k}: area off by {e1:.2e}")
        res.check(e2 <= 1e-12, f"case {k}: constancy integral off by {e2:.2e}")
        res.check(e3 <= 1e-12, f"case {k}: constancy at nodes off by {e3:.2e}")
        res.check(e4 <= 1e-14, f"case {k}: eta - xi leaves the sphere by {e4:.2e}")
    res.metrics["worst_relative_error"] = worst
    return res


def suite_trace(rng, cases=100, fault=None):
    res = SuiteResult("trace")
    tightest = 0.0
    for k in range(cases):
        dim = 2 + k % 2
        f = GaussianMixture.random(rng, dim, terms=int(rng.integers(1, 5)))
        center = rng.normal(size=dim)
        radius = rng.uniform(0.2, 4.0)
        lhs, rhs = check_trace(f, center, radius, quad_rule(dim, 48))
        tightest = max(tightest, lhs / rhs)
        res.check(lhs <= rhs, f"case {k}: trace inequality violated, {lhs:.4g} > {rhs:.4g}")
    res.metrics["max_lhs_over_rhs"] = tightest
    return res


def singular_sup(dim, lam):
    """sup over x of the singular sphere ratio: max(omega_{n-1}, value on the sphere).

    On the sphere the ratio is int_{S^{n-1}} |e - theta|^p with p = 2 lam - (n-1);
    the value at the center is omega_{n-1}.
    """
    p = 2 * lam - (dim - 1)
    if dim == 2:
        on = 2 * np.pi * gamma(p + 1) / gamma(p / 2 + 1) ** 2
    else:
        on = 2 * np.pi * 2 ** (p + 1) / (p / 2 + 1)
    return max(sphere_area(dim), on)


def suite_singular(rng, cases=100, fault=None):
    res = SuiteResult("singular")
    sups = {}
    for k in range(cases):
        dim = 2 + k % 2
        lam = float(rng.uniform(0.05, (dim - 1) / 2))
        rho = float(np.exp(rng.uniform(-2, 2)))
        direction = rng.normal(size=dim)
        direction /= np.linalg.norm(direction)
        if k % 5 == 0:
            dist = rho
        else:
            dist = rho * float(np.exp(rng.uniform(-3, 2.5)))
        x = direction * dist
        try:
            ratio = check_singular_bound(lam, rho, x)
        except NumericalDiagnostic as exc:
            res.check(False, f"case {k}: {exc}")
            continue
        bound = singular_sup(dim, lam)
        key = f"n={dim}"
        sups[key] = max(sups.get(key, 0.0), ratio / bound)
        res.check(np.isfinite(ratio) and ratio <= bound * (1 + 1e-9),
                  f"case {k}: ratio {ratio:.6g} above {bound:.6g}")
    res.metrics["max_ratio_over_bound"] = sups
    return res


def _pv_families():
    return {
        "cancel": Family(lambda r: (1 - r) * np.exp(-r)),
        "step": Family(lambda r: np.where(r < 2, 1.0, 0.0), breakpoints=(2.0,)),
        "gaussian_dispersion": dispersion_family(gaussian_spectrum(1.0), 2.0, 2),
    }


def suite_pv(rng, cases=None, fault=None):
    res = SuiteResult("pv")
    exact = {"cancel": 1.0, "step": 0.0}
    worst = 0.0
    for name, fam in _pv_families().items():
        ref = reference_pv(fam, epsrel=1e-10)
        for scheme_name in NEAR_SCHEMES:
            val = pv_part(fam, PVScheme(near_scheme=scheme_name))
            scale = max(abs(ref), 1e-300) if name != "step" else 1.0
            err = abs(val - ref) / scale
            worst = max(worst, err)
            res.check(err <= 1e-6, f"{name}/{scheme_name}: {val} vs reference {ref}")
            if name in exact:
                res.check(abs(val - exact[name]) <= 1e-10, f"{name}/{scheme_name}: {val} vs exact")
    fams = _pv_families()
    a, b = rng.normal(size=2)
    F, G = fams["cancel"], fams["gaussian_dispersion"]
    comb = Family(lambda r: a * F(r) + b * G(r), scale=G.scale)
    lhs = apply_dispersion_pv(comb)
    rhs = a * apply_dispersion_pv(F) + b * apply_dispersion_pv(G)
    res.check(abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0), f"linearity: {lhs} vs {rhs}")
    pos = Family(lambda r: np.where(r < 1, r * (1 - r) ** 3, 0.0))
    res.check(pv_part(pos).real >= 0, "positive family supported in (0, 1) gave a negative P")
    res.metrics["worst_relative_error"] = worst
    return res


def _random_profile(rng, dim):
    """A smooth positive radial profile sampled on [0, 16]."""
    rho = np.linspace(0.0, 16.0, 321)
    k = int(rng.integers(1, 4))
    amps = rng.uniform(0.2, 1.0, k)
    widths = rng.uniform(0.5, 3.0, k)
    vals = sum(a * np.exp(-((rho / w) ** 2)) for a, w in zip(amps, widths))
    return RadialProfile(rho, vals, name="random", length_scale=0.5)


def suite_polarization(rng, cases=20, fault=None):
    res = SuiteResult("polarization")
    worst = 0.0
    for k in range(cases):
        dim = 2 + k % 2
        f, g = _random_profile(rng, dim), _random_profile(rng, dim)
        eta = float(rng.uniform(1.0, 10.0))
        r = float(rng.uniform(0.1, 2 * 16.0 / eta - 1.05)) if 2 * 16.0 / eta - 1.05 > 0.1 else 0.5
        d = polarization_check(f, g, eta, r, dim)
        worst = max(worst, d)
        res.check(d <= 1e-10, f"case {k}: discrepancy {d:.2e}")
    fa, ga = gaussian_spectrum(1.0), gaussian_spectrum(0.5)
    d = polarization_check(fa, ga, 2.0, 1.0, 2, with_pv=True)
    res.check(d <= 1e-10, f"PV composition discrepancy {d:.2e}")
    worst = max(worst, d)
    res.metrics["worst_discrepancy"] = worst
    return res


def suite_multilinearity(rng, cases=None, fault=None):
    res = SuiteResult("multilinearity")
    q = bessel_spectrum(1.0, 2)
    g = gaussian_spectrum(1.0)
    eta = 6.0
    base2 = q2_hat(q, eta, 2)
    base_s3 = s3_r(g, 2.0, 0.8, 1.3, 2)
    q3_scheme = DEFAULT_Q3_SCHEME
    base3 = q3_hat(g, 2.0, 2, q3_scheme, (16, 16))
    worst = 0.0
    for lam in (0.5, 1.0, 2.0):
        e2 = _rel(q2_hat(q.scaled(lam), eta, 2), lam**2 * base2)
        e3 = _rel(s3_r(g.scaled(lam), 2.0, 0.8, 1.3, 2), lam**3 * base_s3)
        e4 = _rel(s_r(q.scaled(lam), eta, 0.7, 2), lam**2 * s_r(q, eta, 0.7, 2))
        worst = max(worst, e2, e3, e4)
        res.check(e2 <= 1e-12, f"Q_2 scaling at lambda={lam}: {e2:.2e}")
        res.check(e3 <= 1e-12, f"S_3 scaling at lambda={lam}: {e3:.2e}")
        res.check(e4 <= 1e-12, f"S_r scaling at lambda={lam}: {e4:.2e}")
    e5 = _rel(q3_hat(g.scaled(2.0), 2.0, 2, q3_scheme, (16, 16)), 8 * base3)
    res.check(e5 <= 1e-12, f"Q_3 scaling at lambda=2: {e5:.2e}")
    res.metrics["worst_relative_error"] = max(worst, e5)
    return res


SUITES = {
    "parseval": suite_parseval,
    "sphere": suite_sphere,
    "trace": suite_trace,
    "singular": suite_singular,
    "pv": suite_pv,
    "polarization": suite_polarization,
    "multilinearity": suite_multilinearity,
}


def run_suites(names=None, seed=0, cases=None, fault=None):
    """Run the named suites (all by default) with per-suite seeded generators."""
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    if fault is not None and fault not in FAULTS:
        raise KeyError(f"unknown fault {fault!r}")
    out = []
    for i, name in enumerate(names):
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        kwargs = {"fault": fault}
        if cases is not None:
            kwargs["cases"] = cases
        out.append(SUITES[name](rng, **kwargs))
    return out
