"""Recovery of the potential from reflection data, and the Cauchy-problem driver.

At each (x, t) the potential pair comes from the boundary columns of the
RH solution:

    u(x, t)    = (1/pi) int  S12(z) mu-^(1)(x,t;z) dz
    u(-x, -t)  = (sigma/pi) int  S21(z) nu+^(2)(x,t;z) dz

Both integrals are evaluated for every solve; the field assembly uses
the first for x <= 0 and the second (from the solve at (-x, -t)) for
x > 0, which keeps every solve on the well-conditioned half-line.  The
band |x| <= L/4 is evaluated by both routes and the mismatch recorded.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.fft as sfft

from .cauchy import plemelj_apply
from .core import SampledPotential, SpaceGrid, SpectralGrid
from .errors import AdmissibilityError, NmkdvError
from .parallel import get_workers
from .rh import NEUMANN_NORM_LIMIT, build_jump, neumann_iterate, positivity_report, solve_rh
from .scattering import ScatteringData, forward_transform, time_evolve

PHASE_RESOLUTION_LIMIT = 2.1  # require 2L * dz <= this (jump phases resolved on the z-grid)


def check_phase_resolution(space: SpaceGrid, spectral: SpectralGrid) -> None:
    """The jump phase e^{2izx} must stay oversampled on the spectral grid."""
    product = 2.0 * space.half_width * spectral.spacing
    if product > PHASE_RESOLUTION_LIMIT:
        raise AdmissibilityError(
            f"spectral grid too coarse for |x| <= {space.half_width:g}: "
            f"2L*dz = {product:.3g} > {PHASE_RESOLUTION_LIMIT}")


@dataclass(frozen=True)
class ReconstructionSample:
    """One-point reconstruction: the potential pair plus diagnostics."""

    u_value: complex
    u_mirror: complex  # u(-x, -t)
    jump_residual: float
    moment_residual: float
    tail_warning: bool
    mode: str
    iterations: int


def reconstruct_at(sd: ScatteringData, x: float, t: float, mode: str = "auto",
                   window_correction: bool = True, tol: float = 1e-12,
                   tail_tol: float = 1e-8) -> ReconstructionSample:
    """Solve the RH problem at (x, t) and quadrate both recovery integrals."""
    jump = build_jump(sd, x, t)
    rh = solve_rh(jump, mode=mode, tol=tol, window_correction=window_correction)
    w = sd.spectral.quadrature_weights()
    integrand1 = jump.s12 * rh.mu_minus[0]
    integrand2 = jump.s21 * rh.nu_plus[1]
    u_val = complex(np.sum(w * integrand1) / np.pi)
    u_mir = complex(sd.sigma * np.sum(w * integrand2) / np.pi)
    # limit form: u = -2i lim z C((M- S)_12)(z); identical quadrature by design
    moment = complex(-2j * (-np.sum(w * integrand1) / (2j * np.pi)))
    tail = max(abs(integrand1[0]), abs(integrand1[-1]),
               abs(integrand2[0]), abs(integrand2[-1]))
    return ReconstructionSample(u_val, u_mir, rh.jump_residual,
                                abs(u_val - moment), bool(tail > tail_tol),
                                rh.mode, rh.iterations)


def _batch_chunk(n_z: int) -> int:
    return max(16, (1 << 20) // n_z)


def _solve_pairs(sd: ScatteringData, xs: np.ndarray, t: float, mode: str,
                 window_correction: bool, tol: float):
    """Batched solves at (x, t) for every x in xs.

    Returns (u_values, u_mirrors, max jump residual, tail flag).
    u_values[k] = u(xs[k], t) and u_mirrors[k] = u(-xs[k], -t).
    """
    grid = sd.spectral
    z = grid.nodes()
    w = grid.quadrature_weights()
    dt = t - sd.time
    r1 = sd.r1 * np.exp(-8j * z ** 3 * dt)
    r2 = sd.r2 * np.exp(8j * z ** 3 * dt)
    s11 = (sd.sigma * sd.r1 * sd.r2)[None, :]
    sup = float(max(np.max(np.abs(s11[0]) + np.abs(r2)), np.max(np.abs(r1))))
    if mode == "auto":
        mode = "neumann" if sup < NEUMANN_NORM_LIMIT else "direct"

    u_out = np.empty(len(xs), dtype=complex)
    m_out = np.empty(len(xs), dtype=complex)
    worst = 0.0
    tail_flag = False
    if mode == "direct":
        for k, xv in enumerate(xs):
            sample = reconstruct_at(sd, float(xv), t, mode="direct",
                                    window_correction=window_correction, tol=tol)
            u_out[k] = sample.u_value
            m_out[k] = sample.u_mirror
            worst = max(worst, sample.jump_residual)
            tail_flag = tail_flag or sample.tail_warning
        return u_out, m_out, worst, tail_flag

    chunk = _batch_chunk(grid.n_points)
    for k0 in range(0, len(xs), chunk):
        xb = xs[k0:k0 + chunk]
        e2x = np.exp(2j * np.outer(xb, z))
        s12 = sd.sigma * r2[None, :] * e2x
        s21 = r1[None, :] * np.conj(e2x)
        positivity_report(build_jump(sd, float(xb[0]), t))
        psi, _ = neumann_iterate(np.broadcast_to(s11, s12.shape), s12, s21,
                                 grid, tol=tol, window_correction=window_correction)
        # plus-side rows needed for nu+^(2) and the jump-identity residual
        b11 = psi[:, 0, 0, :] * s11 + psi[:, 0, 1, :] * s21 + s11
        b12 = psi[:, 0, 0, :] * s12 + s12
        b21 = psi[:, 1, 0, :] * s11 + psi[:, 1, 1, :] * s21 + s21
        b22 = psi[:, 1, 0, :] * s12
        plus = plemelj_apply(np.stack([b12, b22]), grid, +1, window_correction)
        minus = plemelj_apply(np.stack([b12, b22]), grid, -1, window_correction)
        worst = max(worst, float(np.max(np.abs(plus[0] - minus[0] - b12))),
                    float(np.max(np.abs(plus[1] - minus[1] - b22))))
        mu1 = 1.0 + psi[:, 0, 0, :]
        nu2 = 1.0 + plus[1]
        i1 = s12 * mu1
        i2 = s21 * nu2
        u_out[k0:k0 + chunk] = i1 @ w / np.pi
        m_out[k0:k0 + chunk] = sd.sigma * (i2 @ w) / np.pi
        edge = max(float(np.max(np.abs(i1[:, 0]))), float(np.max(np.abs(i1[:, -1]))),
                   float(np.max(np.abs(i2[:, 0]))), float(np.max(np.abs(i2[:, -1]))))
        tail_flag = tail_flag or edge > 1e-8
    return u_out, m_out, worst, tail_flag


def reconstruct_field(sd: ScatteringData, space: SpaceGrid, t: float,
                      mode: str = "auto", window_correction: bool = True,
                      tol: float = 1e-12, overlap_check: bool = True):
    """u(., t) on the space grid, plus (jump residual, overlap residual, tail flag)."""
    check_phase_resolution(space, sd.spectral)
    x = space.nodes()
    neg = x <= 0.0
    u = np.empty(space.n_points, dtype=complex)
    u_neg, mir_neg, res_a, tail_a = _solve_pairs(sd, x[neg], t, mode,
                                                 window_correction, tol)
    u[neg] = u_neg
    pos = ~neg
    if t == 0.0:
        # mirror outputs of the negative batch already cover x > 0
        strict = x[neg] < 0.0
        u[pos] = mir_neg[strict][::-1]
        res_b, tail_b = 0.0, False
    else:
        _, mir_pos, res_b, tail_b = _solve_pairs(sd, -x[pos], -t, mode,
                                                 window_correction, tol)
        u[pos] = mir_pos
    overlap = 0.0
    if overlap_check:
        band = (x >= -space.half_width / 4.0) & (x < 0.0)
        _, mir_band, _, _ = _solve_pairs(sd, -x[band], -t, mode,
                                         window_correction, tol)
        overlap = float(np.max(np.abs(u[band] - mir_band))) if np.any(band) else 0.0
    return u, max(res_a, res_b), overlap, (tail_a or tail_b)


@dataclass(eq=False)
class ReconstructedField:
    """u(x, t) over the space grid at a list of times, with solve metadata."""

    space: SpaceGrid
    sigma: int
    times: np.ndarray
    values: np.ndarray            # (n_times, n_x)
    jump_residuals: np.ndarray    # (n_times,)
    overlap_residuals: np.ndarray
    tail_warnings: np.ndarray
    scattering: ScatteringData | None = dc_field(default=None, repr=False)

    def values_at(self, t: float) -> np.ndarray:
        hit = np.flatnonzero(np.isclose(self.times, t, rtol=0.0, atol=1e-12))
        if len(hit) == 0:
            raise KeyError(f"time {t} not in field (times: {self.times})")
        return self.values[int(hit[0])]

    def has_time(self, t: float) -> bool:
        return bool(np.any(np.isclose(self.times, t, rtol=0.0, atol=1e-12)))


def _stage(tag: str, exc: NmkdvError) -> NmkdvError:
    exc.args = (f"[{tag}] {exc.args[0]}",) + exc.args[1:]
    return exc


def solve_cauchy_problem(u0: SampledPotential, times, spectral: SpectralGrid | None = None,
                         mode: str = "auto", window_correction: bool = True,
                         tol: float = 1e-12, overlap_check: bool = True,
                         audit: bool = True) -> ReconstructedField:
    """Full pipeline: direct transform, phase evolution, reconstruction per time."""
    if spectral is None:
        spectral = SpectralGrid(u0.grid.half_width, u0.grid.n_points)
    try:
        sd = forward_transform(u0, spectral, audit=audit)
    except NmkdvError as exc:
        raise _stage("forward", exc)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    values = np.empty((len(times), u0.grid.n_points), dtype=complex)
    jr = np.empty(len(times))
    ov = np.empty(len(times))
    tw = np.zeros(len(times), dtype=bool)
    for k, t in enumerate(times):
        try:
            values[k], jr[k], ov[k], tw[k] = reconstruct_field(
                sd, u0.grid, float(t), mode, window_correction, tol, overlap_check)
        except NmkdvError as exc:
            raise _stage(f"inverse t={t:g}", exc)
    return ReconstructedField(u0.grid, u0.sigma, times, values, jr, ov, tw, sd)


def conserved_quantities(field: ReconstructedField):
    """Per-time invariants I0 and I1 of the reconstructed field.

    The integrands pair (x, t) with (-x, -t); missing mirror times are
    solved on demand through the attached scattering data.
    """
    space = field.space
    w = np.full(space.n_points, space.spacing)
    w[0] = w[-1] = 0.5 * space.spacing
    xi = 2.0 * np.pi * sfft.fftfreq(space.n_points, d=space.spacing)

    def mirror_values(t: float) -> np.ndarray:
        if field.has_time(-t):
            return field.values_at(-t)
        if field.scattering is None:
            raise AdmissibilityError(
                f"field lacks the mirrored time {-t:g} and carries no scattering data")
        vals, _, _, _ = reconstruct_field(field.scattering, space, -t)
        return vals

    out = []
    for k, t in enumerate(field.times):
        ut = field.values[k]
        umt = mirror_values(float(t))
        pair = np.conj(umt[::-1])                      # conj u(-x,-t)
        i0 = complex(np.sum(w * ut * pair))
        dut = sfft.ifft(sfft.fft(ut, workers=get_workers()) * (1j * xi),
                        workers=get_workers())
        dumt = sfft.ifft(sfft.fft(umt, workers=get_workers()) * (1j * xi),
                         workers=get_workers())
        i1 = complex(np.sum(w * (dut * np.conj(dumt[::-1])
                                 - field.sigma * ut[::-1] ** 2 * np.conj(umt[::-1] ** 2))))
        out.append((float(t), i0, i1))
    return out


# ---------------------------------------------------------------------------
# field file format:
#   "# nmkdv-field v1 sigma=<+1|-1> L=<L> N_x=<n> times=<t0,t1,...>"
# then, per time, a "# t=<t>" line followed by "x re(u) im(u)" rows.

_FIELD_HEADER = re.compile(
    r"#\s*nmkdv-field\s+v1\s+sigma=([+-]?1)\s+L=([^\s]+)\s+N_x=(\d+)\s+times=([^\s]*)\s*$")


def write_field(path, field: ReconstructedField) -> None:
    x = field.space.nodes()
    tlist = ",".join(f"{t:.17g}" for t in field.times)
    with open(path, "w") as fh:
        fh.write(f"# nmkdv-field v1 sigma={field.sigma:+d} "
                 f"L={field.space.half_width:.17g} N_x={field.space.n_points} "
                 f"times={tlist}\n")
        for k, t in enumerate(field.times):
            fh.write(f"# t={t:.17g}\n")
            for xi_, vi in zip(x, field.values[k]):
                fh.write(f"{xi_:.17g} {vi.real:.17g} {vi.imag:.17g}\n")


def read_field(path) -> ReconstructedField:
    with open(path) as fh:
        m = _FIELD_HEADER.match(fh.readline().strip())
        if not m:
            raise AdmissibilityError(f"not a nmkdv-field v1 file: {path}")
        sigma = int(m.group(1))
        half_width = float(m.group(2))
        n = int(m.group(3))
        times = np.array([float(s) for s in m.group(4).split(",") if s])
        values = np.empty((len(times), n), dtype=complex)
        for k in range(len(times)):
            tline = fh.readline()
            if not tline.startswith("# t="):
                raise AdmissibilityError(f"missing time block header in {path}")
            rows = np.array([fh.readline().split() for _ in range(n)], dtype=float)
            values[k] = rows[:, 1] + 1j * rows[:, 2]
    grid = SpaceGrid(half_width, n)
    zeros = np.zeros(len(times))
    return ReconstructedField(grid, sigma, times, values, zeros.copy(), zeros.copy(),
                              np.zeros(len(times), dtype=bool))
