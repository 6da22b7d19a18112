"""Radial reduction of the sigma_2 prescription: the first-order ODE for s(r).

In the radial case the curvature prescription collapses to

    2 s' cosh(r - s) sinh(r) sinh(s) = n h(r)^2 sinh^2(r) - (n-2) sinh^2(s)

with s(0) = 0, s'(0) = h(0).  The right-hand side is evaluated in the
overflow-free ratio form q = sinh(s)/sinh(r) = cosh(eps) - sinh(eps)/tanh(r),
eps = r - s, which stays finite for r up to several hundred.  The height
function follows by quadrature: phi(r) = phi0 - int_0^r tanh(u - s(u)) du.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import (
    FlatNearZeroWarning,
    NotAdmissible,
    OutOfRange,
    SeriesStartError,
    SingularPoint,
    StepUnderflow,
    TrapViolation,
)
from .lorentz import CurvatureSpectrum
from .prescriptions import RadialPrescription

MIN_STEP = 1e-13
DEFAULT_MAX_STEP = 0.1
# First-order start truncation is [n h'(0)/(n+2)] r0^2 and does not shrink with
# the integration tolerance; 1e-8 keeps it below solver error at tol = 1e-13.
DEFAULT_R0 = 1e-8

# Dormand-Prince 5(4) tableau; row 7 doubles as the 5th-order weights (FSAL).
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_ERR = (
    35 / 384 - 5179 / 57600,
    0.0,
    500 / 1113 - 7571 / 16695,
    125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200,
    11 / 84 - 187 / 2100,
    -1 / 40,
)


def sinh_ratio(r, eps):
    """sinh(r - eps)/sinh(r) without large-argument overflow (r > 0)."""
    return np.cosh(eps) - np.sinh(eps) / np.tanh(r)


def ode_rhs(r: float, s: float, prescription: RadialPrescription) -> float:
    """Slope s'(r) of the radial ODE away from the singular point r = 0."""
    if r <= 0.0 or s <= 0.0:
        raise SingularPoint(f"rhs undefined at r={r}, s={s}; use series_start near 0")
    n = prescription.dimension
    h = prescription(r)
    eps = r - s
    q = sinh_ratio(r, eps)
    if q <= 0.0:
        raise SingularPoint(f"sinh(s)/sinh(r) = {q} <= 0 at r={r}")
    return (n * h * h - (n - 2) * q * q) / (2.0 * math.cosh(eps) * q)


def series_start(prescription: RadialPrescription, r0: float) -> tuple[float, float]:
    """First-order start (s0, s0') = (h(0) r0, h(0)) hopping over r = 0.

    Internally checks that the ODE residual of the start shrinks under halving
    of r0 (quadratically when h is flat at 0, at least linearly otherwise).
    """
    if not 0.0 < r0 <= 1e-3:
        raise ValueError(f"series start requires 0 < r0 <= 1e-3, got {r0}")
    h0 = prescription(0.0)
    res_full = abs(ode_rhs(r0, h0 * r0, prescription) - h0)
    res_half = abs(ode_rhs(r0 / 2.0, h0 * r0 / 2.0, prescription) - h0)
    if res_half > 0.6 * res_full + 1e-12:
        raise SeriesStartError(
            f"start residual {res_full:.3e} -> {res_half:.3e} does not contract under refinement"
        )
    return h0 * r0, h0


@dataclass
class RadialSolution:
    """Co-sampled grids for one radial solve; immutable after construction.

    The grid is the accepted-step grid of the adaptive integrator (step capped
    so consecutive nodes differ by at most the configured max step), with the
    singular node r = 0 prepended.  phi is populated by phi_quadrature.
    """

    r: np.ndarray
    s: np.ndarray
    s_prime: np.ndarray
    prescription: RadialPrescription
    tolerance: float
    tolerance_achieved: float
    phi0: Optional[float] = None
    phi: Optional[np.ndarray] = None
    quad_error: Optional[float] = None

    @property
    def eps(self) -> np.ndarray:
        return self.r - self.s

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def dimension(self) -> int:
        return self.prescription.dimension

    def _bracket(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0.0) or np.any(r > self.r_max * (1.0 + 1e-12) + 1e-300):
            raise OutOfRange(f"r outside solved range [0, {self.r_max}]")
        idx = np.clip(np.searchsorted(self.r, r, side="right") - 1, 0, self.r.size - 2)
        return r, idx

    def _hermite(self, r, idx, y, d):
        r0, r1 = self.r[idx], self.r[idx + 1]
        h = r1 - r0
        t = np.where(h > 0.0, (r - r0) / np.where(h > 0.0, h, 1.0), 0.0)
        t2 = t * t
        t3 = t2 * t
        return (
            y[idx] * (2 * t3 - 3 * t2 + 1)
            + y[idx + 1] * (3 * t2 - 2 * t3)
            + h * (d[idx] * (t3 - 2 * t2 + t) + d[idx + 1] * (t3 - t2))
        )

    def _hermite_deriv(self, r, idx, y, d):
        r0, r1 = self.r[idx], self.r[idx + 1]
        h = np.where(r1 - r0 > 0.0, r1 - r0, 1.0)
        t = (r - r0) / h
        t2 = t * t
        return (
            y[idx] * (6 * t2 - 6 * t) / h
            + y[idx + 1] * (6 * t - 6 * t2) / h
            + d[idx] * (3 * t2 - 4 * t + 1)
            + d[idx + 1] * (3 * t2 - 2 * t)
        )

    def s_at(self, r):
        """Cubic-Hermite evaluation of s (exact at grid nodes)."""
        r, idx = self._bracket(r)
        out = self._hermite(r, idx, self.s, self.s_prime)
        return float(out) if out.ndim == 0 else out

    def eps_at(self, r):
        value = np.asarray(r, dtype=float) - self.s_at(r)
        return float(value) if np.ndim(value) == 0 else value

    def s_prime_at(self, r):
        r, idx = self._bracket(r)
        out = self._hermite_deriv(r, idx, self.s, self.s_prime)
        return float(out) if out.ndim == 0 else out

    def phi_at(self, r):
        if self.phi is None:
            raise ValueError("phi not populated; run phi_quadrature first")
        r, idx = self._bracket(r)
        # phi'(r) = tanh(s - r) = -tanh(eps), exact at nodes
        out = self._hermite(r, idx, self.phi, -np.tanh(self.eps))
        return float(out) if out.ndim == 0 else out


def integrate_s(
    prescription: RadialPrescription,
    r_max: float,
    tol: float,
    max_step: float = DEFAULT_MAX_STEP,
    r0: float = DEFAULT_R0,
    check_start: bool = True,
) -> RadialSolution:
    """Adaptive Dormand-Prince 5(4) integration of the radial ODE to r_max.

    Local error is controlled per unit step (err <= tol * h) with a PI
    step-size controller; the accepted-step grid is the output grid, so the
    max-step cap doubles as the densification bound.
    """
    if r_max <= 0.0:
        raise ValueError("r_max must be positive")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if not prescription.flat_near_zero:
        warnings.warn(
            "prescription is not flagged constant near 0; series start is first-order only",
            FlatNearZeroWarning,
            stacklevel=2,
        )
    r_start = min(r0, r_max / 2.0)
    s_start, slope_start = series_start(prescription, r_start)
    rs, ss, sps, achieved = _advance(prescription, r_start, s_start, r_max, tol, max_step)

    h0 = prescription(0.0)
    grid_r = np.concatenate([[0.0], rs])
    grid_s = np.concatenate([[0.0], ss])
    grid_sp = np.concatenate([[h0], sps])

    solution = RadialSolution(
        r=grid_r,
        s=grid_s,
        s_prime=grid_sp,
        prescription=prescription,
        tolerance=tol,
        tolerance_achieved=achieved,
    )
    _check_invariants(solution)

    if check_start and r_max > 0.01:
        r_check = 0.01
        rs2, ss2, _, _ = _advance(prescription, r_start / 10.0, s_start / 10.0, r_check, tol, max_step)
        diff = abs(solution.s_at(r_check) - ss2[-1])
        if diff > max(tol, 1e-11):
            raise SeriesStartError(
                f"Richardson start check failed: runs from r0 and r0/10 differ by {diff:.3e} at r={r_check}"
            )
    return solution


def _advance(prescription, r_start, s_start, r_max, tol, max_step):
    """Core stepping loop; returns accepted nodes (r, s, s') past r_start."""
    n_stages = 7
    r, s = r_start, s_start
    k = [0.0] * n_stages
    k[0] = ode_rhs(r, s, prescription)
    # Open at the scale of the start point: a large trial step only triggers a
    # rejection cascade down to ~r_start anyway and litters the grid with
    # micro-spaced nodes that hurt stencil conditioning near 0.
    h = min(0.01, max_step, (r_max - r_start) * 0.5, r_start)
    h = max(h, MIN_STEP)
    rs, ss, sps = [], [], []
    err_norm_prev = 1.0
    achieved = 0.0
    while r < r_max:
        if h < MIN_STEP:
            raise StepUnderflow(f"step {h:.3e} below floor at r={r}")
        # Stretch up to 40% to land exactly on r_max (never past max_step): a
        # clamped micro-step would put a near-duplicate node on the grid and
        # wreck stencil conditioning downstream.
        remaining = r_max - r
        final = remaining <= min(1.4 * h, max_step)
        if final:
            h = remaining
        for i in range(1, n_stages):
            si = s + h * sum(a * k[j] for j, a in enumerate(_DP_A[i]))
            ri = r + _DP_C[i] * h
            k[i] = ode_rhs(ri, si, prescription)
        s_new = s + h * sum(a * k[j] for j, a in enumerate(_DP_A[6]))  # 5th-order update
        err_unit = abs(sum(e * ki for e, ki in zip(_DP_ERR, k)))  # error estimate per unit step
        err_norm = err_unit / tol
        if err_norm <= 1.0 or h <= MIN_STEP * 4.0:
            r = r_max if final else r + h
            s = s_new
            k[0] = k[6]  # FSAL: stage 7 is the slope at the accepted node
            rs.append(r)
            ss.append(s)
            sps.append(k[0])
            achieved = max(achieved, err_unit)
            safe = max(err_norm, 1e-10)
            factor = 0.9 * safe ** (-0.7 / 4.0) * max(err_norm_prev, 1e-10) ** (0.4 / 4.0)
            err_norm_prev = safe
            h = min(h * min(5.0, max(0.2, factor)), max_step)
        else:
            h *= max(0.2, 0.9 * err_norm ** (-1.0 / 4.0))
    return np.asarray(rs), np.asarray(ss), np.asarray(sps), achieved


def _check_invariants(solution: RadialSolution) -> None:
    """Trap inequality, monotonicity, and finiteness at every node."""
    n = solution.dimension
    r, s = solution.r[1:], solution.s[1:]
    if not np.all(np.isfinite(solution.eps)):
        raise TrapViolation("non-finite eps on the grid")
    q = sinh_ratio(r, r - s)
    h = solution.prescription(r)
    lhs = (n - 2) * q * q
    rhs = n * h * h
    if np.any(lhs > rhs * (1.0 + 1e-9) + 1e-12):
        worst = int(np.argmax(lhs - rhs))
        raise TrapViolation(
            f"trap inequality failed at r={r[worst]:.6g}: (n-2)q^2={lhs[worst]:.6g} > n h^2={rhs[worst]:.6g}"
        )
    if np.any(np.diff(solution.s) < -1e-12):
        raise TrapViolation("s is not nondecreasing on the grid")
    if np.any(solution.s_prime < -1e-12):
        raise TrapViolation("s' dropped below zero on the grid")


def phi_quadrature(solution: RadialSolution, phi0: float) -> RadialSolution:
    """Populate phi by composite Simpson with one midpoint refinement per interval.

    Each grid interval gets a Simpson value S (endpoints + Hermite midpoint)
    and its half-interval refinement S2 (quarter points added); phi accumulates
    S2 and the tracked quadrature error is the Richardson estimate
    sum |S2 - S| / 15.
    """
    r, eps = solution.r, solution.eps
    w = np.tanh(eps)

    def interp_w(points):
        return np.tanh(points - solution.s_at(points))

    mids = 0.5 * (r[:-1] + r[1:])
    q1 = 0.5 * (r[:-1] + mids)
    q3 = 0.5 * (mids + r[1:])
    w_mid, w_q1, w_q3 = interp_w(mids), interp_w(q1), interp_w(q3)
    hs = np.diff(r)
    coarse = hs / 6.0 * (w[:-1] + 4.0 * w_mid + w[1:])
    fine = hs / 12.0 * (w[:-1] + 4.0 * w_q1 + 2.0 * w_mid + 4.0 * w_q3 + w[1:])
    quad_error = float(np.sum(np.abs(fine - coarse)) / 15.0)
    phi = phi0 - np.concatenate([[0.0], np.cumsum(fine)])
    return replace(solution, phi0=phi0, phi=phi, quad_error=quad_error)


def solve_radial(
    prescription: RadialPrescription,
    r_max: float,
    tol: float,
    phi0: float = 0.0,
    max_step: float = DEFAULT_MAX_STEP,
    check_start: bool = True,
) -> RadialSolution:
    """integrate_s followed by phi_quadrature."""
    solution = integrate_s(prescription, r_max, tol, max_step=max_step, check_start=check_start)
    return phi_quadrature(solution, phi0)


def node_curvatures(solution: RadialSolution) -> tuple[np.ndarray, np.ndarray]:
    """Principal curvatures (radial, tangential) at every grid node."""
    if solution.phi is None:
        raise ValueError("phi not populated; run phi_quadrature first")
    r, eps, phi = solution.r, solution.eps, solution.phi
    scale = np.exp(-phi)
    kr = np.empty_like(r)
    kt = np.empty_like(r)
    h0 = solution.prescription(0.0)
    kr[0] = kt[0] = scale[0] * h0
    kr[1:] = scale[1:] * np.cosh(eps[1:]) * solution.s_prime[1:]
    kt[1:] = scale[1:] * sinh_ratio(r[1:], eps[1:])
    return kr, kt


def curvatures_at(solution: RadialSolution, r: float) -> CurvatureSpectrum:
    """Full curvature spectrum at radius r (limit value at r = 0)."""
    if solution.phi is None:
        raise ValueError("phi not populated; run phi_quadrature first")
    if r < 0.0 or r > solution.r_max * (1.0 + 1e-12):
        raise OutOfRange(f"r={r} outside [0, {solution.r_max}]")
    n = solution.dimension
    node = np.searchsorted(solution.r, r)
    if node < solution.r.size and solution.r[node] == r:
        kr_all, kt_all = node_curvatures(solution)
        kr, kt = float(kr_all[node]), float(kt_all[node])
    elif r == 0.0:
        value = math.exp(-solution.phi0) * solution.prescription(0.0)
        kr = kt = value
    else:
        f = solution.phi_at(r)
        eps = r - solution.s_at(r)
        kr = math.exp(-f) * math.cosh(eps) * solution.s_prime_at(r)
        kt = math.exp(-f) * float(sinh_ratio(r, eps))
    return CurvatureSpectrum.from_kappas([kr] + [kt] * (n - 1))


def grid_derivative(r: np.ndarray, y: np.ndarray, points: int = 5) -> np.ndarray:
    """Derivative of grid data by sliding Lagrange stencils (nonuniform-safe).

    points = 5 gives fourth order, points = 3 the plain centered differences;
    boundary nodes reuse the nearest full stencil (one-sided).
    """
    m = r.size
    if points < 2 or m < points:
        raise ValueError(f"need at least {points} nodes, got {m}")
    half = points // 2
    start = np.clip(np.arange(m) - half, 0, m - points)
    cols = start[:, None] + np.arange(points)[None, :]
    x = r[cols]  # stencil abscissae per node, (m, points)
    yy = y[cols]
    center = np.arange(m) - start  # stencil-local index of the evaluation node
    deriv = np.zeros(m)
    for j in range(points):
        others = [mm for mm in range(points) if mm != j]
        denom = np.prod(x[:, j, None] - x[:, others], axis=1)
        lj = np.empty(m)
        at_center = center == j
        if np.any(at_center):
            # L_j'(x_j) = sum_{m != j} 1/(x_j - x_m)
            lj[at_center] = np.sum(1.0 / (r[at_center, None] - x[at_center][:, others]), axis=1)
        off = ~at_center
        if np.any(off):
            # L_j'(x_c) = prod_{m != j, c}(x_c - x_m) / prod_{m != j}(x_j - x_m)
            prod = np.ones(int(off.sum()))
            xo = x[off]
            xco = r[off]
            co = center[off]
            for mm in others:
                factor = xco - xo[:, mm]
                factor[co == mm] = 1.0
                prod = prod * factor
            lj[off] = prod / denom[off]
        deriv += lj * yy[:, j]
    return deriv


def f2_values(solution: RadialSolution) -> np.ndarray:
    """Measured operator value e^phi sqrt(sigma_2 / C(n,2)) per node.

    The radial slope is re-estimated from the s grid by fourth-order stencils
    rather than read from the integrator's slope field: with the stored slopes
    the prescription identity holds algebraically and the check would be
    vacuous.  The residual therefore reflects the actual solve error.
    """
    n = solution.dimension
    if solution.phi is None:
        raise ValueError("phi not populated; run phi_quadrature first")
    r, eps, phi = solution.r, solution.eps, solution.phi
    sp = grid_derivative(r, solution.s, points=5)
    scale = np.exp(-phi)
    kr = scale * np.cosh(eps) * sp
    kt = np.empty_like(r)
    # r = 0 carries the symmetric limit kappa_i = e^{-phi0} h(0); the measured
    # check lives at the r > 0 nodes.
    kr[0] = kt[0] = scale[0] * solution.prescription(0.0)
    kt[1:] = scale[1:] * sinh_ratio(r[1:], eps[1:])
    sigma2 = (n - 1) * kr * kt + math.comb(n - 1, 2) * kt * kt
    if np.any(sigma2 <= 0.0):
        worst = int(np.argmin(sigma2))
        raise NotAdmissible(f"sigma_2 = {sigma2[worst]:.6g} <= 0 at r = {solution.r[worst]:.6g}")
    return np.exp(phi) * np.sqrt(sigma2 / math.comb(n, 2))


def f2_residual(solution: RadialSolution) -> np.ndarray:
    """Per-node defect |e^phi sqrt(sigma_2/C(n,2)) - h(r)| of the prescription."""
    return np.abs(f2_values(solution) - solution.prescription(solution.r))


def overlap_consistency(
    prescription: RadialPrescription,
    radii,
    tol: float,
    max_step: float = DEFAULT_MAX_STEP,
) -> float:
    """Max disagreement of independent solves on their overlaps.

    The exhaustion argument predicts s is independent of the outer radius, so
    the discrepancy measures pure integration noise.
    """
    radii = sorted(float(x) for x in radii)
    if len(radii) < 2:
        raise ValueError("need at least two radii")
    solutions = [
        integrate_s(prescription, r_max, tol, max_step=max_step, check_start=False)
        for r_max in radii
    ]
    worst = 0.0
    for i in range(len(solutions)):
        for j in range(i + 1, len(solutions)):
            short, long_ = solutions[i], solutions[j]
            diff = np.abs(long_.s_at(short.r) - short.s)
            worst = max(worst, float(np.max(diff)))
    return worst
