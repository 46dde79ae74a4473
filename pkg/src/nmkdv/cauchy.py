"""Cauchy transform and Plemelj boundary projections on the real line.

The projections are realized as Fourier multipliers on the uniform
spectral grid: with the convention ``fhat(xi) = int f(z) e^{-i xi z} dz``,

    P+ f = F^{-1}[ chi_{xi>0} fhat ] + (1/2) F^{-1}[ chi_{xi=0} fhat ]
    P- f = -F^{-1}[ chi_{xi<0} fhat ] - (1/2) F^{-1}[ chi_{xi=0} fhat ]

so that P+ - P- = I holds exactly by construction and both operators are
L^2 contractions.  The half weight on the zero bin is the principal-value
convention; the Nyquist bin of an even-length grid is annihilated.

The multiplier realization computes the projection for the *periodized*
line.  ``window_correction=True`` subtracts the closed-form moment
expansion of the periodization defect (the cot-kernel minus the Cauchy
kernel), which the singular-equation solver needs for window-independent
accuracy.  The correction is identical for both signs, so the partition
identity P+ - P- = I survives it.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .core import SpectralGrid
from .errors import OffAxisAccuracyError
from .parallel import get_workers


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """Scalar complex samples on a spectral grid (matrix data is handled
    componentwise by the callers)."""

    spectral: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))
        if self.values.shape[-1] != self.spectral.n_points:
            raise ValueError("values length does not match the spectral grid")

    def tail_magnitude(self) -> float:
        return float(max(np.max(np.abs(self.values[..., 0])),
                         np.max(np.abs(self.values[..., -1]))))

    def l2_norm(self) -> float:
        w = self.spectral.quadrature_weights()
        return float(np.sqrt(np.sum(w * np.abs(self.values) ** 2)))


@lru_cache(maxsize=16)
def _multipliers(n: int, spacing: float, sign: int) -> np.ndarray:
    xi = sfft.fftfreq(n, d=spacing)
    m = np.zeros(n)
    if sign > 0:
        m[xi > 0] = 1.0
        m[xi == 0] = 0.5
    else:
        m[xi < 0] = -1.0
        m[xi == 0] = -0.5
    if n % 2 == 0:
        m[n // 2] = 0.0
    m.setflags(write=False)
    return m


def _window_moment_poly(values: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """Leading periodization defect of the multiplier projection.

    (pi/P) cot(pi s / P) - 1/s = -(pi^2/3P^2) s - (pi^4/45P^4) s^3 - ...,
    integrated against f; a cubic polynomial in z built from the first
    four moments of f.  Remainder is O(P^-6).
    """
    z = grid.nodes()
    w = grid.quadrature_weights()
    P = grid.period
    c2 = np.pi ** 2 / (3.0 * P ** 2)
    c4 = np.pi ** 4 / (45.0 * P ** 4)
    m0 = np.sum(values * w, axis=-1)[..., None]
    m1 = np.sum(values * (w * z), axis=-1)[..., None]
    m2 = np.sum(values * (w * z ** 2), axis=-1)[..., None]
    m3 = np.sum(values * (w * z ** 3), axis=-1)[..., None]
    poly = (-c2 * (m1 - z * m0)
            - c4 * (m3 - 3.0 * z * m2 + 3.0 * z ** 2 * m1 - z ** 3 * m0))
    return poly / (2j * np.pi)


def plemelj_apply(values: np.ndarray, grid: SpectralGrid, sign: int,
                  window_correction: bool = False) -> np.ndarray:
    """Apply P^{sign} along the last axis of ``values``."""
    mult = _multipliers(grid.n_points, grid.spacing, +1 if sign > 0 else -1)
    out = sfft.ifft(sfft.fft(values, axis=-1, workers=get_workers()) * mult,
                    axis=-1, workers=get_workers())
    if window_correction:
        out = out - _window_moment_poly(values, grid)
    return out


def plemelj_project(f: BoundaryFunction, sign, window_correction: bool = False) -> BoundaryFunction:
    """Boundary projection P^+ or P^- of a boundary function.

    ``sign`` may be +1/-1 or "+"/"-".
    """
    s = +1 if sign in (+1, "+", "plus") else -1
    return BoundaryFunction(f.spectral, plemelj_apply(f.values, f.spectral, s, window_correction))


@lru_cache(maxsize=8)
def _plemelj_matrix_cached(grid: SpectralGrid, sign: int, window_correction: bool) -> np.ndarray:
    n = grid.n_points
    mult = _multipliers(n, grid.spacing, sign)
    # columns: operator applied to the canonical basis
    F = sfft.fft(np.eye(n), axis=0, workers=get_workers())
    mat = sfft.ifft(mult[:, None] * F, axis=0, workers=get_workers())
    if window_correction:
        z = grid.nodes()
        w = grid.quadrature_weights()
        P = grid.period
        c2 = np.pi ** 2 / (3.0 * P ** 2)
        c4 = np.pi ** 4 / (45.0 * P ** 4)
        ones = np.ones(n)
        corr = (-c2 * (np.outer(ones, w * z) - np.outer(z, w))
                - c4 * (np.outer(ones, w * z ** 3) - 3.0 * np.outer(z, w * z ** 2)
                        + 3.0 * np.outer(z ** 2, w * z) - np.outer(z ** 3, w)))
        mat = mat - corr / (2j * np.pi)
    mat.setflags(write=False)
    return mat


def plemelj_matrix(grid: SpectralGrid, sign, window_correction: bool = False) -> np.ndarray:
    """Dense matrix of the projection, for collocation solves and spectra."""
    s = +1 if sign in (+1, "+", "plus") else -1
    return _plemelj_matrix_cached(grid, s, bool(window_correction))


def cauchy_offaxis(f: BoundaryFunction, z0: complex) -> complex:
    """Cauchy transform (1/2pi i) int f(s)/(s - z0) ds at a point off the axis."""
    if abs(z0.imag) < f.spectral.spacing:
        raise OffAxisAccuracyError(
            f"evaluation point {z0} is within one grid spacing of the axis")
    z = f.spectral.nodes()
    w = f.spectral.quadrature_weights()
    return complex(np.sum(w * f.values / (z - z0)) / (2j * np.pi))


def cauchy_offaxis_many(values: np.ndarray, grid: SpectralGrid, z0: complex) -> np.ndarray:
    """Vectorized off-axis Cauchy transform along the last axis."""
    if abs(z0.imag) < grid.spacing:
        raise OffAxisAccuracyError(
            f"evaluation point {z0} is within one grid spacing of the axis")
    z = grid.nodes()
    w = grid.quadrature_weights()
    return np.sum(values * (w / (z - z0)), axis=-1) / (2j * np.pi)


def first_moment(f: BoundaryFunction) -> complex:
    """lim_{|z|->inf} z C(f)(z) = -(1/2pi i) int f."""
    w = f.spectral.quadrature_weights()
    return complex(-np.sum(w * f.values) / (2j * np.pi))
