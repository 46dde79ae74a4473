"""Jump data assembly and the singular integral equation for the RH solution.

At each (x, t) the boundary deviation Psi- solves

    Psi-  =  P^-( Psi- S + S ),      S = V - I,

row by row; Psi+ then follows from one application of P^+.  The solver
offers a dense collocation solve (robust whatever the jump size) and a
fixed-point iteration that converges in the small-data regime; both run
against the same projection operators, so their agreement is a genuine
cross-check of the discretization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cauchy import plemelj_apply, plemelj_matrix
from .core import SpectralGrid
from .errors import (ConsistencyError, ContractionFailureError,
                     DegenerateJumpError, SolvabilityError)
from .jost import JostField
from .scattering import ScatteringData

NEUMANN_NORM_LIMIT = 0.5


@dataclass(frozen=True, eq=False)
class JumpData:
    """Jump matrix data V = I + S at fixed (x, t) on the spectral grid.

    S is stored by its three nonzero entries; ``s11`` carries no phase
    (it is x- and t-independent), the off-diagonal entries carry
    e^{+-2i theta} with theta = z x + 4 z^3 t.  ``phase`` is e^{2i theta}.
    """

    spectral: SpectralGrid
    sigma: int
    x: float
    t: float
    s11: np.ndarray
    s12: np.ndarray
    s21: np.ndarray
    phase: np.ndarray

    def jump_matrix(self) -> np.ndarray:
        """V as an (n_z, 2, 2) array."""
        n = self.spectral.n_points
        v = np.zeros((n, 2, 2), dtype=complex)
        v[:, 0, 0] = 1.0 + self.s11
        v[:, 0, 1] = self.s12
        v[:, 1, 0] = self.s21
        v[:, 1, 1] = 1.0
        return v

    def det_residual(self) -> float:
        """max |det V - 1|; vanishes identically up to rounding."""
        return float(np.max(np.abs((1.0 + self.s11) - self.s12 * self.s21 - 1.0)))

    def s_plus(self) -> np.ndarray:
        n = self.spectral.n_points
        s = np.zeros((n, 2, 2), dtype=complex)
        s[:, 0, 1] = self.s12
        return s

    def s_minus(self) -> np.ndarray:
        n = self.spectral.n_points
        s = np.zeros((n, 2, 2), dtype=complex)
        s[:, 1, 0] = self.s21
        return s

    def sup_norm(self) -> float:
        """Row-sum matrix norm of S, maximized over the grid."""
        return float(max(np.max(np.abs(self.s11) + np.abs(self.s12)),
                         np.max(np.abs(self.s21))))


def build_jump(sd: ScatteringData, x: float, t: float | None = None) -> JumpData:
    """Assemble S(x, t; z) from reflection data.

    ``t`` is the absolute time of the jump; the data's own time is folded
    into the phases, so evolving the data first and building at the same
    t gives the identical jump.  Omitting t uses the data's stored time.
    """
    if t is None:
        t = sd.time
    z = sd.spectral.nodes()
    dt = t - sd.time
    r1 = sd.r1 * np.exp(-8j * z ** 3 * dt)
    r2 = sd.r2 * np.exp(8j * z ** 3 * dt)
    e2x = np.exp(2j * z * x)
    phase = e2x * np.exp(8j * z ** 3 * t) if t != 0.0 else e2x
    s11 = sd.sigma * sd.r1 * sd.r2
    s12 = sd.sigma * r2 * e2x
    s21 = r1 * np.conj(e2x)
    return JumpData(sd.spectral, sd.sigma, float(x), float(t), s11, s12, s21, phase)


@dataclass(frozen=True)
class PositivityReport:
    """Spectral bounds of I + S_H that control unique solvability.

    ``mu_minus_min`` > 0 is the coercivity constant of the real part of
    the quadratic form; ``c_plus`` bounds the operator norm of I + S.
    """

    mu_plus_min: float
    mu_minus_min: float
    c_minus: float
    c_plus: float


def positivity_eigenvalues(jump: JumpData) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigenvalue fields mu_+(z), mu_-(z) of I + S_H."""
    tr = np.real(jump.s11)
    off = 0.5 * (jump.s12 + np.conj(jump.s21))
    disc = np.sqrt(tr * tr + 4.0 * np.abs(off) ** 2)
    return 1.0 + 0.5 * (tr + disc), 1.0 + 0.5 * (tr - disc)


def positivity_report(jump: JumpData) -> PositivityReport:
    """Grid minima of the positivity eigenvalues plus the norm bound.

    Raises :class:`SolvabilityError` when the coercivity constant is not
    positive (this happens exactly when |r| < 1 fails badly enough).
    """
    mu_p, mu_m = positivity_eigenvalues(jump)
    r1a = np.abs(jump.s21)
    r2a = np.abs(jump.s12)
    c_plus = float(np.max(np.sqrt((r1a + 1.0) ** 2 + (r2a + 1.0) ** 2 + (r1a + r2a) ** 2)))
    report = PositivityReport(float(np.min(mu_p)), float(np.min(mu_m)),
                              float(np.min(mu_m)), c_plus)
    if report.mu_minus_min <= 0.0:
        raise SolvabilityError(
            f"positivity failed: min eigenvalue {report.mu_minus_min:.3e} <= 0 "
            f"(reflection data with modulus >= 1)")
    return report


@dataclass(frozen=True, eq=False)
class RHSolution:
    """Boundary values of the RH solution at one (x, t)."""

    spectral: SpectralGrid
    sigma: int
    x: float
    t: float
    psi_minus: np.ndarray  # (2, 2, n_z) deviation M- - I
    psi_plus: np.ndarray   # (2, 2, n_z) deviation M+ - I
    mu_minus: np.ndarray   # (2, n_z) first column of M-
    nu_plus: np.ndarray    # (2, n_z) second column of M+
    jump_residual: float
    mode: str
    iterations: int


def _psi_times_s(psi, s11, s12, s21):
    """(Psi S) entrywise for Psi rows stacked as (..., 2, 2, n)."""
    b11 = psi[..., 0, 0, :] * s11 + psi[..., 0, 1, :] * s21
    b12 = psi[..., 0, 0, :] * s12
    b21 = psi[..., 1, 0, :] * s11 + psi[..., 1, 1, :] * s21
    b22 = psi[..., 1, 0, :] * s12
    return b11, b12, b21, b22


def neumann_iterate(s11, s12, s21, grid: SpectralGrid, tol: float = 1e-12,
                    maxit: int = 300, window_correction: bool = True):
    """Fixed-point iteration Psi <- P^-(Psi S + S), batched over leading axes.

    The S entries broadcast against each other to shape (..., n_z).
    Returns (psi (..., 2, 2, n_z), iterations).
    """
    shape = np.broadcast_shapes(s11.shape, s12.shape, s21.shape)
    psi = np.zeros(shape[:-1] + (2, 2, shape[-1]), dtype=complex)
    delta_prev = np.inf
    rising = 0
    for it in range(1, maxit + 1):
        b11, b12, b21, b22 = _psi_times_s(psi, s11, s12, s21)
        stack = np.stack([b11 + s11, b12 + s12, b21 + s21, b22], axis=0)
        new = plemelj_apply(stack, grid, -1, window_correction)
        nxt = np.empty_like(psi)
        nxt[..., 0, 0, :] = new[0]
        nxt[..., 0, 1, :] = new[1]
        nxt[..., 1, 0, :] = new[2]
        nxt[..., 1, 1, :] = new[3]
        delta = float(np.max(np.abs(nxt - psi)))
        psi = nxt
        if delta < tol:
            return psi, it
        rising = rising + 1 if delta > delta_prev else 0
        if rising >= 5 and delta > 1.0:
            raise ContractionFailureError(
                f"fixed-point iteration diverging (step change {delta:.3e} after "
                f"{it} iterations); use the direct solver")
        delta_prev = delta
    raise ContractionFailureError(
        f"fixed-point iteration did not reach {tol:.1e} within {maxit} iterations; "
        f"use the direct solver")


def rh_system_matrix(jump: JumpData, window_correction: bool = True) -> np.ndarray:
    """Dense collocation matrix of the row equation psi - P^-(psi S) = rhs."""
    n = jump.spectral.n_points
    pm = plemelj_matrix(jump.spectral, -1, window_correction)
    mat = np.zeros((2 * n, 2 * n), dtype=complex)
    eye = np.eye(n)
    mat[:n, :n] = eye - pm * jump.s11[None, :]
    mat[:n, n:] = -pm * jump.s21[None, :]
    mat[n:, :n] = -pm * jump.s12[None, :]
    mat[n:, n:] = eye
    return mat


def _solve_direct(jump: JumpData, window_correction: bool):
    n = jump.spectral.n_points
    mat = rh_system_matrix(jump, window_correction)
    rhs = np.zeros((2 * n, 2), dtype=complex)
    rhs[:n, 0] = plemelj_apply(jump.s11, jump.spectral, -1, window_correction)
    rhs[n:, 0] = plemelj_apply(jump.s12, jump.spectral, -1, window_correction)
    rhs[:n, 1] = plemelj_apply(jump.s21, jump.spectral, -1, window_correction)
    try:
        sol = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateJumpError(f"collocation matrix is singular: {exc}") from exc
    psi = np.empty((2, 2, n), dtype=complex)
    psi[0, 0] = sol[:n, 0]
    psi[0, 1] = sol[n:, 0]
    psi[1, 0] = sol[:n, 1]
    psi[1, 1] = sol[n:, 1]
    return psi


def solve_psi_minus(jump: JumpData, mode: str = "auto", tol: float = 1e-12,
                    maxit: int = 300, window_correction: bool = True):
    """Solve (I - P_S^-) Psi- = P^- S.  Returns (psi_minus, mode_used, iterations).

    mode "direct" builds and factorizes the dense system; "neumann"
    iterates the contraction (requires a small jump); "auto" picks the
    iteration when the jump norm is below 0.5.
    """
    positivity_report(jump)
    if mode not in ("auto", "direct", "neumann"):
        raise ValueError(f"unknown solver mode {mode!r}")
    if mode == "neumann" and jump.sup_norm() >= 1.0:
        raise ContractionFailureError(
            f"jump norm {jump.sup_norm():.3f} >= 1; the fixed point cannot "
            f"contract, use the direct solver")
    if mode == "auto":
        mode = "neumann" if jump.sup_norm() < NEUMANN_NORM_LIMIT else "direct"
    if mode == "direct":
        return _solve_direct(jump, window_correction), "direct", 0
    psi, iters = neumann_iterate(jump.s11, jump.s12, jump.s21, jump.spectral,
                                 tol, maxit, window_correction)
    return psi, "neumann", iters


def extend_psi_plus(jump: JumpData, psi_minus: np.ndarray, mode: str = "",
                    iterations: int = 0, window_correction: bool = True,
                    residual_tol: float = 1e-8) -> RHSolution:
    """One application of P^+ and extraction of the mu-, nu+ columns.

    The recorded jump residual ||M+ - M- V|| is an identity up to solver
    tolerance; exceeding ``10 * residual_tol`` raises
    :class:`ConsistencyError`.
    """
    grid = jump.spectral
    b11, b12, b21, b22 = _psi_times_s(psi_minus, jump.s11, jump.s12, jump.s21)
    arg = np.stack([b11 + jump.s11, b12 + jump.s12, b21 + jump.s21, b22], axis=0)
    plus = plemelj_apply(arg, grid, +1, window_correction)
    psi_plus = np.empty_like(psi_minus)
    psi_plus[0, 0] = plus[0]
    psi_plus[0, 1] = plus[1]
    psi_plus[1, 0] = plus[2]
    psi_plus[1, 1] = plus[3]
    flat = np.stack([psi_plus[0, 0], psi_plus[0, 1], psi_plus[1, 0], psi_plus[1, 1]])
    residual = float(np.max(np.abs(flat - np.stack(
        [psi_minus[0, 0], psi_minus[0, 1], psi_minus[1, 0], psi_minus[1, 1]]) - arg)))
    if residual > 10.0 * residual_tol:
        raise ConsistencyError(
            f"jump condition residual {residual:.3e} exceeds 10 x {residual_tol:.1e}")
    mu_minus = np.stack([1.0 + psi_minus[0, 0], psi_minus[1, 0]])
    nu_plus = np.stack([psi_plus[0, 1], 1.0 + psi_plus[1, 1]])
    return RHSolution(grid, jump.sigma, jump.x, jump.t, psi_minus, psi_plus,
                      mu_minus, nu_plus, residual, mode, iterations)


def solve_rh(jump: JumpData, mode: str = "auto", tol: float = 1e-12,
             maxit: int = 300, window_correction: bool = True,
             residual_tol: float = 1e-8) -> RHSolution:
    """Full solve at one (x, t): Psi- fixed point, then the P^+ extension."""
    psi_minus, used, iters = solve_psi_minus(jump, mode, tol, maxit, window_correction)
    return extend_psi_plus(jump, psi_minus, used, iters, window_correction, residual_tol)


def jost_rh_crosscheck(field: JostField, rh: RHSolution, sd: ScatteringData,
                       x: float) -> float:
    """Compare M+ built from Jost columns and a(z) against the RH solve.

    Zero-time data only.  The residual is taken over the interior half of
    the spectral window, |z| <= Z/2: near the window edge the jump data
    is truncated, so the two constructions legitimately diverge there at
    the level of the neglected tails.
    """
    idx = field.space.index_near(x)
    m_p = field.row("plus", idx)
    m_m = field.row("minus", idx)
    col1 = m_p[:, :, 0] / sd.a[:, None]
    col2 = m_m[:, :, 1]
    m_plus_jost = np.stack([col1, col2], axis=2)  # (n_z, 2, 2)
    m_plus_rh = np.empty_like(m_plus_jost)
    m_plus_rh[:, 0, 0] = 1.0 + rh.psi_plus[0, 0]
    m_plus_rh[:, 0, 1] = rh.psi_plus[0, 1]
    m_plus_rh[:, 1, 0] = rh.psi_plus[1, 0]
    m_plus_rh[:, 1, 1] = 1.0 + rh.psi_plus[1, 1]
    z = field.spectral.nodes()
    interior = np.abs(z) <= field.spectral.half_width / 2.0
    return float(np.max(np.abs(m_plus_jost[interior] - m_plus_rh[interior])))
