"""Grids, sampled fields, Fourier transforms and spectral measurements.

Fourier convention: ``f^(xi) = int f(x) exp(-i x.xi) dx``, inverse carries
``(2 pi)^-n``. Cartesian samples are stored in "centered" order, so index
``N/2`` along every axis is the origin in both physical and frequency space.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ExtrapolationError, FitWindowError, InvalidInputError


def bracket(x):
    """Japanese bracket (1 + |x|^2)^(1/2) of a radial variable."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


@dataclass(frozen=True)
class GridSpec1D:
    rho_min: float
    rho_max: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if not (np.isfinite(self.rho_min) and np.isfinite(self.rho_max)):
            raise InvalidInputError("grid bounds must be finite")
        if self.rho_min < 0 or self.rho_min >= self.rho_max:
            raise InvalidInputError("need 0 <= rho_min < rho_max")
        if self.count < 2:
            raise InvalidInputError("need at least two grid nodes")
        if self.spacing not in ("linear", "logarithmic"):
            raise InvalidInputError(f"unknown spacing {self.spacing!r}")
        if self.spacing == "logarithmic" and self.rho_min <= 0:
            raise InvalidInputError("logarithmic spacing requires rho_min > 0")

    def nodes(self) -> np.ndarray:
        if self.spacing == "linear":
            return np.linspace(self.rho_min, self.rho_max, self.count)
        return np.geomspace(self.rho_min, self.rho_max, self.count)


class RadialProfile:
    """A radial function rho -> complex, either sampled on nodes or analytic.

    Analytic profiles evaluate anywhere on rho >= 0. Sampled profiles use a
    cubic spline through their nodes and refuse to extrapolate.
    """

    def __init__(
        self,
        rho,
        values,
        derivative_values=None,
        *,
        evaluator: Optional[Callable] = None,
        derivative_evaluator: Optional[Callable] = None,
        length_scale: float = 1.0,
        name: str = "",
        grid: Optional[GridSpec1D] = None,
    ):
        rho = np.asarray(rho, dtype=float)
        values = np.asarray(values, dtype=complex)
        if rho.ndim != 1 or rho.shape != values.shape:
            raise InvalidInputError("rho and values must be 1-D arrays of equal length")
        if rho.size < 2 or np.any(np.diff(rho) <= 0):
            raise InvalidInputError("rho nodes must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("profile values must be finite")
        if derivative_values is not None:
            derivative_values = np.asarray(derivative_values, dtype=complex)
            if derivative_values.shape != values.shape:
                raise InvalidInputError("derivative_values shape mismatch")
        for arr in (rho, values, derivative_values):
            if arr is not None:
                arr.setflags(write=False)
        self.rho = rho
        self.values = values
        self.derivative_values = derivative_values
        self._evaluator = evaluator
        self._derivative_evaluator = derivative_evaluator
        self.length_scale = float(length_scale)
        self.name = name
        self.grid = grid

    @property
    def kind(self) -> str:
        return "analytic" if self._evaluator is not None else "sampled"

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.values.imag == 0))

    @property
    def rho_limit(self) -> float:
        return np.inf if self._evaluator is not None else float(self.rho[-1])

    @property
    def has_derivative(self) -> bool:
        return self._derivative_evaluator is not None or self.kind == "sampled"

    @cached_property
    def _spline(self):
        re = CubicSpline(self.rho, self.values.real)
        im = CubicSpline(self.rho, self.values.imag) if not self.is_real else None
        return re, im

    def _check_range(self, rho):
        lo, hi = self.rho[0], self.rho[-1]
        tol = 1e-12 * max(1.0, hi)
        if np.any(rho < lo - tol) or np.any(rho > hi + tol):
            raise ExtrapolationError(
                f"profile {self.name or ''} evaluated outside [{lo:g}, {hi:g}]",
                requested_max=float(np.max(rho)),
                available_max=float(hi),
            )

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self._evaluator is not None:
            return self._evaluator(rho)
        self._check_range(rho)
        re, im = self._spline
        out = re(rho)
        return out if im is None else out + 1j * im(rho)

    def derivative(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self._derivative_evaluator is not None:
            return self._derivative_evaluator(rho)
        if self._evaluator is not None:
            raise InvalidInputError("analytic profile has no derivative")
        self._check_range(rho)
        re, im = self._spline
        out = re(rho, 1)
        return out if im is None else out + 1j * im(rho, 1)

    def scaled(self, c) -> "RadialProfile":
        """The profile c * p (c may be complex)."""
        ev = self._evaluator
        dev = self._derivative_evaluator
        return RadialProfile(
            self.rho,
            c * self.values,
            None if self.derivative_values is None else c * self.derivative_values,
            evaluator=None if ev is None else (lambda r: c * ev(r)),
            derivative_evaluator=None if dev is None else (lambda r: c * dev(r)),
            length_scale=self.length_scale,
            name=f"{c}*{self.name}",
            grid=self.grid,
        )

    def __add__(self, other: "RadialProfile") -> "RadialProfile":
        if self.kind == "analytic" and other.kind == "analytic":
            rho = self.rho
            f, g = self._evaluator, other._evaluator
            df, dg = self._derivative_evaluator, other._derivative_evaluator
            both = df is not None and dg is not None
            return RadialProfile(
                rho,
                f(rho) + g(rho),
                evaluator=lambda r: f(r) + g(r),
                derivative_evaluator=(lambda r: df(r) + dg(r)) if both else None,
                length_scale=min(self.length_scale, other.length_scale),
                name=f"({self.name}+{other.name})",
            )
        if self.kind == "sampled" and other.kind == "sampled":
            if self.rho.shape != other.rho.shape or np.any(self.rho != other.rho):
                raise InvalidInputError("sampled profiles must share nodes to be added")
            return RadialProfile(
                self.rho,
                self.values + other.values,
                length_scale=min(self.length_scale, other.length_scale),
                name=f"({self.name}+{other.name})",
                grid=self.grid,
            )
        raise InvalidInputError("cannot add a sampled and an analytic profile")

    def check_derivative_consistency(self, rtol=1e-3) -> float:
        """Max deviation of derivative_values from centered differences of values.

        Returns the deviation relative to max |derivative|; raises if above rtol.
        """
        if self.derivative_values is None:
            return 0.0
        fd = np.gradient(self.values, self.rho, edge_order=2)
        scale = max(np.max(np.abs(self.derivative_values)), 1e-300)
        dev = float(np.max(np.abs(fd[1:-1] - self.derivative_values[1:-1])) / scale)
        if dev > rtol:
            raise InvalidInputError(f"derivative_values disagree with finite differences ({dev:.3g})")
        return dev

    @classmethod
    def analytic(cls, func, derivative=None, *, grid=None, length_scale=1.0, name=""):
        grid = grid or GridSpec1D(0.0, 64.0, 257)
        rho = grid.nodes()
        return cls(
            rho,
            func(rho),
            None if derivative is None else derivative(rho),
            evaluator=func,
            derivative_evaluator=derivative,
            length_scale=length_scale,
            name=name,
            grid=grid,
        )

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rho", "re", "im"])
        for r, v in zip(self.rho, self.values):
            w.writerow([repr(float(r)), repr(float(v.real)), repr(float(v.imag))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path, *, name="", length_scale=1.0) -> "RadialProfile":
        return cls.parse_csv(Path(path).read_text(), name=name, length_scale=length_scale)

    @classmethod
    def parse_csv(cls, text, *, name="", length_scale=1.0) -> "RadialProfile":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"rho", "re", "im"}:
            raise InvalidInputError("profile CSV needs columns rho, re, im")
        rho = np.array([float(r["rho"]) for r in rows])
        vals = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        return cls(rho, vals, name=name, length_scale=length_scale)


@dataclass(frozen=True)
class CartesianGrid:
    dim: int
    half_extent: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise InvalidInputError("dim must be 2 or 3")
        if not (self.half_extent > 0 and np.isfinite(self.half_extent)):
            raise InvalidInputError("half_extent must be positive")
        n = self.points_per_axis
        if n < 2 or n % 2:
            raise InvalidInputError("points_per_axis must be even")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / self.points_per_axis

    @property
    def dual_spacing(self) -> float:
        return np.pi / self.half_extent

    @property
    def nyquist(self) -> float:
        return 0.5 * self.points_per_axis * self.dual_spacing

    @property
    def shape(self):
        return (self.points_per_axis,) * self.dim

    def axis(self) -> np.ndarray:
        n = self.points_per_axis
        return (np.arange(n) - n // 2) * self.spacing

    def frequency_axis(self) -> np.ndarray:
        n = self.points_per_axis
        return (np.arange(n) - n // 2) * self.dual_spacing

    def _radius(self, ax):
        r2 = np.zeros(self.shape)
        for d in range(self.dim):
            shape = [1] * self.dim
            shape[d] = -1
            r2 = r2 + ax.reshape(shape) ** 2
        return np.sqrt(r2)

    def radius(self) -> np.ndarray:
        return self._radius(self.axis())

    def frequency_radius(self) -> np.ndarray:
        return self._radius(self.frequency_axis())

    def coordinates(self):
        return np.meshgrid(*([self.axis()] * self.dim), indexing="ij")


def _as_samples(grid: CartesianGrid, samples) -> np.ndarray:
    a = np.asarray(samples, dtype=complex)
    if a.shape != grid.shape:
        raise InvalidInputError(f"samples shape {a.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("non-finite samples")
    a = a.copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Field:
    grid: CartesianGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_samples(self.grid, self.samples))

    @classmethod
    def from_function(cls, grid: CartesianGrid, func) -> "Field":
        return cls(grid, func(*grid.coordinates()))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * self.grid.spacing ** self.grid.dim))

    def is_real(self, rtol=1e-12) -> bool:
        scale = np.max(np.abs(self.samples))
        return bool(np.max(np.abs(self.samples.imag)) <= rtol * max(scale, 1e-300))

    def __mul__(self, c):
        return Field(self.grid, self.samples * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: CartesianGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_samples(self.grid, self.samples))

    @classmethod
    def from_radial(cls, grid: CartesianGrid, func) -> "SpectralField":
        return cls(grid, func(grid.frequency_radius()))

    def l2_norm(self) -> float:
        """(2 pi)^(-n/2) times the L2 norm of the spectrum, i.e. the physical L2 norm."""
        g = self.grid
        s = np.sum(np.abs(self.samples) ** 2) * (g.dual_spacing / (2 * np.pi)) ** g.dim
        return float(np.sqrt(s))


def forward_transform(f: Field) -> SpectralField:
    g = f.grid
    axes = tuple(range(g.dim))
    spec = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(f.samples, axes=axes), axes=axes), axes=axes)
    return SpectralField(g, spec * g.spacing ** g.dim)


def inverse_transform(F: SpectralField) -> Field:
    g = F.grid
    axes = tuple(range(g.dim))
    x = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(F.samples, axes=axes), axes=axes), axes=axes)
    return Field(g, x / g.spacing ** g.dim)


def apply_multiplier(f: Field, symbol) -> Field:
    """Apply the radial Fourier multiplier symbol(|xi|) to f."""
    F = forward_transform(f)
    return inverse_transform(SpectralField(f.grid, F.samples * symbol(f.grid.frequency_radius())))


def sobolev_norm(f, alpha: float, delta: float = 0.0) -> float:
    """||<x>^delta <D>^alpha f||_{L^2} on the grid (p = 2 only).

    Accepts a Field or a SpectralField. The spectral multiplier is applied
    first, then the physical weight.
    """
    if not (np.isfinite(alpha) and np.isfinite(delta)):
        raise InvalidInputError("alpha and delta must be finite")
    F = f if isinstance(f, SpectralField) else forward_transform(f)
    g = F.grid
    weighted = SpectralField(g, F.samples * bracket(g.frequency_radius()) ** alpha)
    if delta == 0.0:
        return weighted.l2_norm()
    u = inverse_transform(weighted)
    return Field(g, u.samples * bracket(g.radius()) ** delta).l2_norm()


def fractional_laplacian(f: Field, beta: float) -> Field:
    """(-Delta)^(beta/2) f, i.e. the multiplier |xi|^beta."""
    if not (beta >= 0):
        raise InvalidInputError("beta must be nonnegative")
    if beta == 0:
        return f
    return apply_multiplier(f, lambda k: k ** beta)


def radial_average(F: SpectralField, *, name="shell average") -> RadialProfile:
    """Mean of |F| over |xi| shells of width equal to the dual spacing.

    Node k sits at k * dual_spacing and collects lattice points with
    round(|xi| / dual_spacing) == k. Empty shells are dropped.
    """
    g = F.grid
    dk = g.dual_spacing
    idx = np.floor(g.frequency_radius().ravel() / dk + 0.5).astype(np.int64)
    counts = np.bincount(idx)
    sums = np.bincount(idx, weights=np.abs(F.samples).ravel())
    keep = counts > 0
    rho = np.nonzero(keep)[0] * dk
    return RadialProfile(rho, sums[keep] / counts[keep], name=name)


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    log_amplitude: float
    window: tuple
    residual_rms: float
    nodes: int = 0

    def as_dict(self):
        return {
            "exponent": self.exponent,
            "log_amplitude": self.log_amplitude,
            "window": list(self.window),
            "residual_rms": self.residual_rms,
            "nodes": self.nodes,
        }


def fit_decay(p, window, rho=None) -> DecayFit:
    """Least-squares slope of log|p| against log<rho> over a window.

    ``p`` is a RadialProfile, or an array of values when ``rho`` is given.
    The returned exponent is minus the slope.
    """
    lo, hi = map(float, window)
    if not lo < hi:
        raise FitWindowError("window must satisfy rho_lo < rho_hi", window=(lo, hi))
    if rho is None:
        rho, vals = p.rho, p.values
    else:
        rho, vals = np.asarray(rho, dtype=float), np.asarray(p)
    sel = (rho >= lo * (1 - 1e-12)) & (rho <= hi * (1 + 1e-12))
    count = int(np.count_nonzero(sel))
    if count < 8:
        raise FitWindowError(f"fit window [{lo:g}, {hi:g}] holds {count} nodes, need 8", nodes=count)
    mag = np.abs(vals[sel])
    if np.any(~np.isfinite(mag)) or np.any(mag <= 0):
        raise FitWindowError("zero or non-finite magnitudes inside fit window", window=(lo, hi))
    x = np.log(bracket(rho[sel]))
    y = np.log(mag)
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return DecayFit(
        exponent=float(-coef[1]),
        log_amplitude=float(coef[0]),
        window=(lo, hi),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        nodes=count,
    )


_FIELD_MAGIC = "backscatter-field"


def save_field(f, path) -> None:
    """Flat binary: one text header line, then interleaved re/im float64 (little endian)."""
    g = f.grid
    kind = "spectral" if isinstance(f, SpectralField) else "physical"
    header = f"{_FIELD_MAGIC} kind={kind} dim={g.dim} extent={g.half_extent!r} points={g.points_per_axis}\n"
    data = np.ascontiguousarray(f.samples, dtype="<c16").view("<f8")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if not header or header[0] != _FIELD_MAGIC:
            raise InvalidInputError("not a field file")
        meta = dict(item.split("=", 1) for item in header[1:])
        grid = CartesianGrid(int(meta["dim"]), float(meta["extent"]), int(meta["points"]))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != 2 * np.prod(grid.shape):
        raise InvalidInputError("field file truncated")
    samples = raw.view("<c16").reshape(grid.shape)
    cls = SpectralField if meta.get("kind") == "spectral" else Field
    return cls(grid, samples)
