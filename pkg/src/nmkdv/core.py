"""Grids, sampled potentials, and the weighted-norm admissibility gates.

Everything here is an immutable value; the rest of the pipeline treats
these objects as read-only and every operation is pure.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .errors import AdmissibilityError
from .parallel import get_workers

DEFAULT_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform symmetric grid on [-L, L], both endpoints included.

    Node j sits at ``-L + j*h`` with ``h = 2L/(n_points-1)``; the grid
    contains x = 0 exactly when ``n_points`` is odd.
    """

    half_width: float
    n_points: int

    def __post_init__(self):
        if not (self.half_width > 0):
            raise AdmissibilityError(f"half_width must be positive, got {self.half_width}")
        if self.n_points < 8:
            raise AdmissibilityError(f"n_points must be at least 8, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n_points)

    def index_near(self, x: float) -> int:
        j = int(round((x + self.half_width) / self.spacing))
        return min(max(j, 0), self.n_points - 1)


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform symmetric grid on [-Z, Z]; closed under z -> -z by index reversal."""

    half_width: float
    n_points: int

    def __post_init__(self):
        if not (self.half_width > 0):
            raise AdmissibilityError(f"half_width must be positive, got {self.half_width}")
        if self.n_points < 8:
            raise AdmissibilityError(f"n_points must be at least 8, got {self.n_points}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def period(self) -> float:
        # implied period of the trigonometric interpolant used by the
        # multiplier operators: one spacing beyond the closed window
        return self.n_points * self.spacing

    def nodes(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n_points)

    def index_near(self, z: float) -> int:
        j = int(round((z + self.half_width) / self.spacing))
        return min(max(j, 0), self.n_points - 1)

    @staticmethod
    def reflect(values: np.ndarray) -> np.ndarray:
        """Samples of z -> f(-z), exact on the closed symmetric grid."""
        return values[..., ::-1]

    def quadrature_weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w


@dataclass(frozen=True, eq=False)
class SampledPotential:
    """Complex samples of the potential on a :class:`SpaceGrid`.

    ``sigma`` is the focusing (+1) / defocusing (-1) sign of the cubic
    term.  ``profile``, when present, is the analytic function the
    samples were drawn from; the Jost integrator uses it to evaluate the
    potential between nodes (piecewise-constant profiles stay exact that
    way).  Sampled-only potentials fall back to trigonometric
    interpolation, which assumes smooth decaying data.
    """

    grid: SpaceGrid
    values: np.ndarray
    sigma: int
    profile: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.sigma not in (+1, -1):
            raise AdmissibilityError(f"sigma must be +1 or -1, got {self.sigma}")
        if len(self.values) != self.grid.n_points:
            raise AdmissibilityError(
                f"got {len(self.values)} samples for a grid of {self.grid.n_points} points")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))

    def tail_magnitude(self) -> float:
        return float(max(abs(self.values[0]), abs(self.values[-1])))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Potential at arbitrary points, via profile or trigonometric interpolation."""
        if self.profile is not None:
            return np.asarray(self.profile(np.asarray(x)), dtype=complex)
        return _trig_interpolate(self.grid, self.values, np.asarray(x))


def _trig_interpolate(grid: SpaceGrid, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = grid.n_points
    vhat = sfft.fft(values, workers=get_workers())
    k = sfft.fftfreq(n)  # cycles per sample
    s = (x + grid.half_width) / grid.spacing  # fractional sample index
    phase = np.exp(2j * np.pi * np.outer(s, k))
    if n % 2 == 0:
        phase[:, n // 2] = np.cos(np.pi * s)
    return phase @ vhat / n


def gaussian_potential(grid: SpaceGrid, amplitude: complex, width: float = 1.0,
                       center: float = 0.0, sigma: int = 1) -> SampledPotential:
    """u(x) = amplitude * exp(-((x-center)/width)^2)."""
    def profile(x):
        return amplitude * np.exp(-(((x - center) / width) ** 2))
    return SampledPotential(grid, profile(grid.nodes()), sigma, profile)


def box_potential(grid: SpaceGrid, amplitude: complex, length: float,
                  sigma: int = 1) -> SampledPotential:
    """u(x) = amplitude on [0, length], zero elsewhere."""
    if length <= 0:
        raise AdmissibilityError(f"box length must be positive, got {length}")
    def profile(x):
        x = np.asarray(x)
        return np.where((x >= 0.0) & (x <= length), amplitude, 0.0 + 0.0j)
    return SampledPotential(grid, profile(grid.nodes()), sigma, profile)


@dataclass(frozen=True)
class NormReport:
    """Weighted and Sobolev norms of a potential, plus the small-norm gates.

    ``flag_no_zeros`` is the sufficient condition for a(z), d(z) to be
    zero-free; ``flag_r_below_one`` additionally forces |r_{1,2}| < 1.
    """

    l1: float
    l2: float
    l2_1: float
    l2_3: float
    h1: float
    h11: float
    h3: float
    flag_no_zeros: bool
    flag_r_below_one: bool

    def __str__(self):
        return (f"L1={self.l1:.6g} L2={self.l2:.6g} L2,1={self.l2_1:.6g} "
                f"L2,3={self.l2_3:.6g} H1={self.h1:.6g} H1,1={self.h11:.6g} "
                f"H3={self.h3:.6g} no_zeros={self.flag_no_zeros} "
                f"r_below_one={self.flag_r_below_one}")


def _spectral_derivatives(grid: SpaceGrid, values: np.ndarray, orders=(1, 2, 3)):
    xi = 2.0 * np.pi * sfft.fftfreq(grid.n_points, d=grid.spacing)
    vhat = sfft.fft(values, workers=get_workers())
    return {p: sfft.ifft(vhat * (1j * xi) ** p, workers=get_workers()) for p in orders}


def compute_norms(u: SampledPotential) -> NormReport:
    """Trapezoid quadrature of the L^1, weighted-L^2 and Sobolev norms.

    Derivatives are spectral; this is admissible for decaying samples
    (the tail tolerance makes the periodic extension harmless).
    """
    v = u.values
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        raise AdmissibilityError(f"non-finite potential sample at index {bad}")
    x = u.grid.nodes()
    w = np.full(u.grid.n_points, u.grid.spacing)
    w[0] = w[-1] = 0.5 * u.grid.spacing
    bracket = np.sqrt(1.0 + x * x)  # <x>

    def l2norm(f):
        return float(np.sqrt(np.sum(w * np.abs(f) ** 2)))

    d = _spectral_derivatives(u.grid, v)
    l1 = float(np.sum(w * np.abs(v)))
    l2 = l2norm(v)
    l2_1 = l2norm(bracket * v)
    l2_3 = l2norm(bracket ** 3 * v)
    h1 = float(np.hypot(l2, l2norm(d[1])))
    h11 = float(np.hypot(l2_1, l2norm(bracket * d[1])))
    h3 = float(np.sqrt(l2 ** 2 + l2norm(d[1]) ** 2 + l2norm(d[2]) ** 2 + l2norm(d[3]) ** 2))
    cond1 = l1 * np.exp(2.0 * l1) < 1.0
    cond2 = 1.0 - l1 * (1.0 + 2.0 * np.exp(2.0 * l1)) > 0.0
    return NormReport(l1, l2, l2_1, l2_3, h1, h11, h3, bool(cond1), bool(cond2))


def reflect_potential(u: SampledPotential) -> SampledPotential:
    """Samples of x -> u(-x); exact index reversal, no interpolation."""
    prof = None
    if u.profile is not None:
        base = u.profile
        prof = lambda x: base(-np.asarray(x))
    return SampledPotential(u.grid, u.values[::-1].copy(), u.sigma, prof)


# ---------------------------------------------------------------------------
# potential file format:  "# nmkdv-potential v1 sigma=<+1|-1> L=<L> N=<n>"
# followed by one "x re(u) im(u)" line per sample, 17 significant digits.

_POT_HEADER = re.compile(
    r"#\s*nmkdv-potential\s+v1\s+sigma=([+-]?1)\s+L=([^\s]+)\s+N=(\d+)\s*$")


def write_potential(path, u: SampledPotential) -> None:
    x = u.grid.nodes()
    with open(path, "w") as fh:
        fh.write(f"# nmkdv-potential v1 sigma={u.sigma:+d} "
                 f"L={u.grid.half_width:.17g} N={u.grid.n_points}\n")
        for xi, vi in zip(x, u.values):
            fh.write(f"{xi:.17g} {vi.real:.17g} {vi.imag:.17g}\n")


def read_potential(path) -> SampledPotential:
    with open(path) as fh:
        header = fh.readline()
        m = _POT_HEADER.match(header.strip())
        if not m:
            raise AdmissibilityError(f"not a nmkdv-potential v1 file: {path}")
        sigma = int(m.group(1))
        half_width = float(m.group(2))
        n = int(m.group(3))
        data = np.loadtxt(fh)
    if data.shape != (n, 3):
        raise AdmissibilityError(
            f"expected {n} rows of 3 columns in {path}, got shape {data.shape}")
    grid = SpaceGrid(half_width, n)
    return SampledPotential(grid, data[:, 1] + 1j * data[:, 2], sigma)
