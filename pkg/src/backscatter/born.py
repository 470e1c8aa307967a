"""Q^_2, Q^_3, the high-frequency cutoff and the truncated Born approximation."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dispersion import DEFAULT_RULE, DEFAULT_S3_ORDERS, bilinear_s_r, dispersion_family, s3_r
from .errors import BudgetError, InvalidInputError, NumericalDiagnostic
from .fields import GridSpec1D, RadialProfile
from .panels import composite_rule, refine
from .pv import Family, PVScheme, _segments, apply_dispersion_pv, delta_part, pv_integrate

TRANSITIONS = ("smoothstep2",)

# r-grid tuned for the cubic term: its families decay fast in r at moderate |eta|
DEFAULT_Q3_SCHEME = PVScheme(panel_order=8, r_max=16.0)
DEFAULT_Q3_BUDGET = 2.0e8


@dataclass(frozen=True)
class CutoffSpec:
    c0: float = 4.0
    transition: str = "smoothstep2"

    def __post_init__(self):
        if not self.c0 > 0:
            raise InvalidInputError("cutoff c0 must be positive")
        if self.transition not in TRANSITIONS:
            raise InvalidInputError(f"unknown cutoff transition {self.transition!r}")


def cutoff_chi(spec: CutoffSpec, xi_abs):
    """0 below c0, 1 above 2 c0, quintic smoothstep (C^2 joints) in between."""
    x = np.asarray(xi_abs, dtype=float)
    if np.any(x < 0):
        raise InvalidInputError("|xi| must be nonnegative")
    s = np.clip((x - spec.c0) / spec.c0, 0.0, 1.0)
    return s * s * s * (10 - 15 * s + 6 * s * s)


def q2_hat(qhat: RadialProfile, eta_abs, dim, scheme: PVScheme = PVScheme(), rule=DEFAULT_RULE):
    """Q^_2(q)(eta) = (i pi d + P) S_r(q)(eta)."""
    return apply_dispersion_pv(dispersion_family(qhat, eta_abs, dim, rule), scheme)


def q2_parts(qhat: RadialProfile, eta_abs, dim, scheme: PVScheme = PVScheme(), rule=DEFAULT_RULE):
    """(S_1, PVResult of P S_r) computed separately, for structure checks."""
    fam = dispersion_family(qhat, eta_abs, dim, rule)
    return delta_part(fam), pv_integrate(fam, scheme)


def _node_count(scheme: PVScheme, fam: Family) -> int:
    total = 0
    for sub in (scheme.subdivisions, 2 * scheme.subdivisions):
        s = scheme.with_subdivisions(sub)
        for breaks, kind in _segments(s, fam):
            n = (len(refine(breaks, sub)) - 1) * scheme.panel_order
            total += 2 * n if kind == "reflect" else n
    return total + 8


def q3_cost(qhat: RadialProfile, eta_abs, dim, scheme=DEFAULT_Q3_SCHEME, orders=None) -> int:
    """Estimated number of integrand evaluations of :func:`q3_hat`."""
    orders = tuple(orders or DEFAULT_S3_ORDERS[dim])
    scale = qhat.length_scale / max(1.0, 0.5 * eta_abs)
    nodes = _node_count(scheme, Family(lambda r: r, scale=scale))
    return int(nodes * nodes * np.prod(orders))


def q3_hat(
    qhat: RadialProfile,
    eta_abs,
    dim,
    scheme: PVScheme = DEFAULT_Q3_SCHEME,
    orders: Optional[Sequence[int]] = None,
    *,
    budget: float = DEFAULT_Q3_BUDGET,
    expensive: bool = False,
    return_estimate: bool = False,
):
    """Q^_3(q)(eta) = (i pi d_2 + P_2)(i pi d_1 + P_1) S_{3,(r1,r2)}(q)(eta).

    The inner operator acts in r1 for every r2 node of the outer one.
    """
    if dim == 3 and not expensive:
        raise InvalidInputError("Q_3 in three dimensions needs expensive=True")
    cost = q3_cost(qhat, eta_abs, dim, scheme, orders)
    if cost > budget:
        raise BudgetError(
            f"Q_3 needs about {cost:.3g} integrand evaluations, above the budget {budget:.3g}",
            estimate=cost,
            budget=budget,
        )
    scale = qhat.length_scale / max(1.0, 0.5 * eta_abs)
    inner_errors = []

    def inner(r2):
        def f(r1):
            r1 = np.asarray(r1, dtype=float)
            out = np.zeros(r1.shape, dtype=complex)
            pos = r1 > 0
            if np.any(pos):
                out[pos] = s3_r(qhat, eta_abs, r1[pos], r2, dim, orders)
            return out

        fam = Family(f, scale=scale)
        # the r1 family peaks where the two spheres coincide, so its range
        # must reach well past r2 (this only matters at the outer tail probes)
        reach = scheme.r_max
        while reach < 2 * r2:
            reach *= 2
        res = pv_integrate(fam, replace(scheme, r_max=reach))
        inner_errors.append(res.error_estimate)
        return 1j * np.pi * delta_part(fam) + res.value

    def outer(r2):
        r2 = np.asarray(r2, dtype=float)
        return np.array([inner(x) if x > 0 else 0.0 for x in r2.ravel()], dtype=complex).reshape(r2.shape)

    fam2 = Family(outer, scale=scale)
    res2 = pv_integrate(fam2, scheme)
    value = 1j * np.pi * delta_part(fam2) + res2.value
    if return_estimate:
        return value, res2.error_estimate + max(inner_errors, default=0.0)
    return value


@dataclass(frozen=True, eq=False)
class BornResult:
    eta_grid: GridSpec1D
    eta: np.ndarray
    chi: np.ndarray
    qhat: np.ndarray
    q2hat: np.ndarray
    q3hat: Optional[np.ndarray]
    qB_hat: np.ndarray
    residual_hat: np.ndarray
    order: int
    failures: dict = field(default_factory=dict)

    @property
    def valid(self) -> np.ndarray:
        """Nodes where every term was computed."""
        return np.isfinite(self.qB_hat)

    def to_csv(self, path=None) -> str:
        cols = ["eta_abs", "re_qhat", "im_qhat", "re_q2", "im_q2"]
        if self.q3hat is not None:
            cols += ["re_q3", "im_q3"]
        cols += ["re_qB", "im_qB", "re_res", "im_res"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for i, e in enumerate(self.eta):
            row = [e, self.qhat[i].real, self.qhat[i].imag, self.q2hat[i].real, self.q2hat[i].imag]
            if self.q3hat is not None:
                row += [self.q3hat[i].real, self.q3hat[i].imag]
            row += [self.qB_hat[i].real, self.qB_hat[i].imag, self.residual_hat[i].real, self.residual_hat[i].imag]
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _map(func, items, workers):
    if workers is None or workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def born_approx(
    qhat: RadialProfile,
    J: int,
    spec: CutoffSpec,
    dim: int,
    eta_grid: GridSpec1D,
    scheme: PVScheme = PVScheme(),
    q3_scheme: PVScheme = DEFAULT_Q3_SCHEME,
    *,
    rule=DEFAULT_RULE,
    orders=None,
    q3_budget: float = DEFAULT_Q3_BUDGET,
    workers: int = 1,
) -> BornResult:
    """chi q^_B = chi (q^ + Q^_2 + ... + Q^_J) on the nodes of ``eta_grid``.

    Nodes where a numerical diagnostic is raised hold NaN and are listed in
    ``failures``; they drop out of decay fits.
    """
    if J not in (2, 3):
        raise InvalidInputError("Born order J must be 2 or 3")
    eta = eta_grid.nodes()
    if eta[0] <= 0:
        raise InvalidInputError("eta grid must be positive")
    chi = cutoff_chi(spec, eta)

    def node(e):
        try:
            q2 = q2_hat(qhat, e, dim, scheme, rule)
            q3 = q3_hat(qhat, e, dim, q3_scheme, orders, budget=q3_budget) if J == 3 else 0.0
            return q2, q3, None
        except NumericalDiagnostic as exc:
            return np.nan, np.nan, str(exc)

    results = _map(node, eta, workers)
    q2 = np.array([r[0] for r in results], dtype=complex)
    q3 = np.array([r[1] for r in results], dtype=complex) if J == 3 else None
    failures = {i: r[2] for i, r in enumerate(results) if r[2] is not None}
    q = np.asarray(qhat(eta), dtype=complex)
    higher = q2 if q3 is None else q2 + q3
    qB = chi * (q + higher)
    residual = chi * q - qB
    return BornResult(eta_grid, eta, chi, q, q2, q3, qB, residual, J, failures)


def polarization_check(fhat: RadialProfile, ghat: RadialProfile, eta_abs, r, dim, *, with_pv=False,
                       scheme: PVScheme = PVScheme(), rule=DEFAULT_RULE) -> float:
    """Relative gap in 2 B(f, g) = T(f + g) - T(f) - T(g) for the bilinear S_r.

    With ``with_pv`` the operator is (i pi d + P) S_r and ``r`` is ignored.
    """
    if with_pv:
        def T(a, b):
            return apply_dispersion_pv(dispersion_family(a, eta_abs, dim, rule, ghat=b), scheme)
    else:
        def T(a, b):
            return complex(bilinear_s_r(a, b, eta_abs, r, dim, rule))
    s = fhat + ghat
    lhs = 2 * T(fhat, ghat)
    tf, tg, ts = T(fhat, fhat), T(ghat, ghat), T(s, s)
    rhs = ts - tf - tg
    scale = max(abs(ts), abs(tf), abs(tg), abs(lhs), 1e-300)
    return float(abs(lhs - rhs) / scale)
