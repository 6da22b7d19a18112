"""Radial barrier construction for direction-dependent prescriptions.

Pipeline: sampled sup/inf envelopes over distance spheres, positive-part
normalization to straddle 1, eps0 * min(1, 1/r^2) safety margins, per-window
cubic approximants blended with a C-infinity bump into one smooth function,
flattening to a constant near 0, then two radial solves normalized to vanish
at infinity.  The resulting pair pinches every radial solution whose datum
lies between the envelopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import asymptotics
from .errors import (
    FitBudgetExceeded,
    MarginTooLarge,
    NonPositiveEnvelope,
    NotIntegrable,
    RadialSigma2Error,
    SamplerCapExceeded,
)
from .ode import RadialSolution, solve_radial
from .prescriptions import DirectionalPrescription, RadialPrescription, sphere_points

SAMPLER_CAP = 200_000
ENVELOPE_STABLE_TOL = 1e-3
_GRID_STEP = 0.05
_TAIL_SAMPLE_END = 700.0  # sinh overflows past ~710; continue as 1 + c/r^2 beyond


def bump(x):
    """C-infinity plateau bump: 1 on |x| <= 1/4, 0 on |x| >= 3/4."""
    x = np.abs(np.asarray(x, dtype=float))
    t = np.clip((0.75 - x) / 0.5, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def _sphere_extrema(prescription: DirectionalPrescription, r: float, count: int) -> tuple[float, float]:
    values = [prescription(x) for x in sphere_points(prescription.dimension, r, count)]
    return max(values), min(values)


def _stabilized_envelopes(prescription: DirectionalPrescription, r_grid: np.ndarray):
    """(sup, inf) arrays on r_grid with sampler density doubled until stable."""
    count = prescription.sphere_nodes
    hm, hp = np.empty(r_grid.size), np.empty(r_grid.size)
    for k, r in enumerate(r_grid):
        hm[k], hp[k] = _sphere_extrema(prescription, float(r), count)
    while True:
        if 2 * count > SAMPLER_CAP:
            raise SamplerCapExceeded(f"envelope sampler still moving at {count} nodes per sphere")
        count *= 2
        hm2, hp2 = np.empty(r_grid.size), np.empty(r_grid.size)
        for k, r in enumerate(r_grid):
            hm2[k], hp2[k] = _sphere_extrema(prescription, float(r), count)
        moved = max(float(np.max(np.abs(hm2 - hm))), float(np.max(np.abs(hp2 - hp))))
        hm, hp = hm2, hp2
        if moved < ENVELOPE_STABLE_TOL:
            return hm, hp, count


def radial_envelopes(prescription: DirectionalPrescription, r_grid) -> tuple[np.ndarray, np.ndarray]:
    """Tabulated h^-(r) = sup and h^+(r) = inf over sampled distance spheres."""
    r_grid = np.asarray(r_grid, dtype=float)
    hm, hp, _ = _stabilized_envelopes(prescription, r_grid)
    return hm, hp


def positive_part_normalize(h_minus, h_plus) -> tuple[np.ndarray, np.ndarray]:
    """1 + (h^- - 1)_+ and 1 - (1 - h^+)_+, so the pair straddles 1."""
    h_minus = np.asarray(h_minus, dtype=float)
    h_plus = np.asarray(h_plus, dtype=float)
    out_minus = 1.0 + np.maximum(h_minus - 1.0, 0.0)
    out_plus = 1.0 - np.maximum(1.0 - h_plus, 0.0)
    if np.any(out_plus <= 0.0):
        raise NonPositiveEnvelope("upper envelope fell to zero after normalization")
    return out_minus, out_plus


def margin_profile(r, eps0: float):
    """eps0 on [0, 1], eps0 / r^2 beyond; continuous at r = 1."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return eps0 * np.minimum(1.0, 1.0 / np.where(r > 0.0, r * r, 1.0))


def add_margins(h_minus, h_plus, eps0: float, r_grid) -> tuple[np.ndarray, np.ndarray]:
    """Widen the normalized envelopes by the eps0 margin profile."""
    h_minus = np.asarray(h_minus, dtype=float)
    h_plus = np.asarray(h_plus, dtype=float)
    if eps0 <= 0.0 or eps0 >= float(np.min(h_plus)):
        raise MarginTooLarge(f"need 0 < eps0 < inf h^+ = {np.min(h_plus):.6g}, got {eps0}")
    margin = margin_profile(r_grid, eps0)
    return h_minus + margin, h_plus - margin


class SmoothBlend:
    """Per-window cubic approximants glued with the plateau bump.

    On [i, i+1] the value is theta(r - i) g_i(r) + (1 - theta(r - i)) g_{i+1}(r);
    approximant indices at or past tail_from delegate to the exact tail callable
    (zero approximation error there by construction).
    """

    def __init__(self, coeffs, centers, tail: Optional[Callable], tail_from: int, n_windows: int):
        self._coeffs = coeffs
        self._centers = centers
        self._tail = tail
        self._tail_from = tail_from
        self._n_windows = n_windows

    def _approximant(self, index: int, r):
        if self._tail is not None and index >= self._tail_from:
            return self._tail(r)
        index = min(index, len(self._coeffs) - 1)
        return np.polyval(self._coeffs[index], np.asarray(r, dtype=float) - self._centers[index])

    def __call__(self, r):
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty(r_arr.shape)
        windows = np.clip(np.floor(r_arr).astype(int), 0, self._n_windows - 1)
        for i in np.unique(windows):
            mask = windows == i
            w = bump(r_arr[mask] - i)
            out[mask] = w * self._approximant(i, r_arr[mask]) + (1.0 - w) * self._approximant(i + 1, r_arr[mask])
        return float(out[0]) if np.ndim(r) == 0 else out


def smooth_blend(
    r_grid,
    values,
    eps0: float,
    tail: Optional[Callable] = None,
    tail_from: Optional[int] = None,
) -> SmoothBlend:
    """Fit cubic least-squares approximants per unit window and blend them.

    Window i carries the sup-error budget eps0/(i+1)^2, checked on the region
    where its blend weight is nonzero; a window that misses its budget is
    refitted once on tightened support before FitBudgetExceeded is raised.
    When a tail callable is supplied, approximants from tail_from on are the
    tail itself, splicing the blend into the exact function.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if r_grid[0] != 0.0 or np.any(np.diff(r_grid) <= 0.0):
        raise ValueError("construction grid must increase strictly from 0")
    if float(np.max(np.diff(r_grid))) > 0.2:
        raise ValueError("construction grid too coarse; resample below 0.2 spacing")
    r_end = float(r_grid[-1])
    n_windows = max(int(math.floor(r_end)), 1)
    if tail is None:
        tail_from = n_windows + 1
    elif tail_from is None:
        tail_from = n_windows - 1

    coeffs, centers = [], []
    for i in range(min(tail_from, n_windows + 1)):
        budget = eps0 / (i + 1) ** 2
        fitted = None
        for span in (1.0, 0.8):  # full support, then one tightened refit
            lo, hi = max(0.0, i - span), min(r_end, i + span)
            mask = (r_grid >= lo) & (r_grid <= hi)
            if int(mask.sum()) < 8:
                continue
            center = 0.5 * (lo + hi)
            c = np.polyfit(r_grid[mask] - center, values[mask], 3)
            active = mask & (r_grid >= i - 0.75) & (r_grid <= i + 0.75)
            err = float(np.max(np.abs(np.polyval(c, r_grid[active] - center) - values[active])))
            if err <= budget:
                fitted = (c, center)
                break
        if fitted is None:
            raise FitBudgetExceeded(f"window {i} cannot meet budget {budget:.3e}")
        coeffs.append(fitted[0])
        centers.append(fitted[1])
    return SmoothBlend(coeffs, centers, tail, tail_from, n_windows)


class FlattenedNearZero:
    """theta-blend of the global sup (or inf) into the function near r = 0."""

    def __init__(self, inner: Callable, plateau: float):
        self._inner = inner
        self.plateau = plateau

    def __call__(self, r):
        w = bump(r)
        inner = self._inner(r)
        out = w * self.plateau + (1.0 - w) * inner
        return float(out) if np.ndim(r) == 0 else out


def flatten_near_zero(func: Callable, mode: str, r_samples, limit: float = 1.0) -> FlattenedNearZero:
    """Blend the global sup (mode='sup') or inf (mode='inf') over the bump support.

    The extremum is taken over dense samples plus the limit at infinity; the
    output is constant on [0, 1/4] and dominates (sup) or is dominated by
    (inf) the input everywhere.
    """
    sampled = np.asarray(func(np.asarray(r_samples, dtype=float)))
    if mode == "sup":
        plateau = max(float(np.max(sampled)), limit)
    elif mode == "inf":
        plateau = min(float(np.min(sampled)), limit)
    else:
        raise ValueError("mode must be 'sup' or 'inf'")
    return FlattenedNearZero(func, plateau)


@dataclass
class BarrierPair:
    """Smoothed barrier prescriptions with their normalized radial solutions."""

    g_minus: RadialPrescription
    g_plus: RadialPrescription
    phi_minus: RadialSolution
    phi_plus: RadialSolution
    eps0: float
    normalization_constants: tuple[float, float]
    limit_minus: asymptotics.PhiLimitEstimate
    limit_plus: asymptotics.PhiLimitEstimate
    diagnostics: dict


def _margined_envelope_tail(
    prescription: DirectionalPrescription,
    count: int,
    eps0: float,
    branch: str,
    r_start: float,
) -> Callable:
    """Sampled envelope with positive part and margin, interpolated on the tail.

    Sphere sampling per evaluation would make far-tail quadratures cost
    hundreds of thousands of h evaluations, so the margined envelope is
    sampled once (densely near the splice, geometrically out to the sinh
    overflow horizon) and monotone-cubic interpolated; beyond the horizon it
    continues as 1 +- c/r^2, matching the margin profile's decay.
    """
    from scipy.interpolate import PchipInterpolator

    near = np.arange(max(r_start - 2.0, 0.0), min(r_start + 5.0, _TAIL_SAMPLE_END), _GRID_STEP)
    far = np.geomspace(min(r_start + 5.0, _TAIL_SAMPLE_END - 1.0), _TAIL_SAMPLE_END, 300)
    r_samples = np.unique(np.concatenate([near, far]))
    values = np.empty(r_samples.size)
    for k, r in enumerate(r_samples):
        hi, lo = _sphere_extrema(prescription, float(r), count)
        m = float(margin_profile(r, eps0))
        values[k] = 1.0 + max(hi - 1.0, 0.0) + m if branch == "sup" else 1.0 - max(1.0 - lo, 0.0) - m
    interp = PchipInterpolator(r_samples, values, extrapolate=False)
    r_last = float(r_samples[-1])
    c_last = (float(values[-1]) - 1.0) * r_last * r_last

    def evaluate(r):
        r_arr = np.asarray(r, dtype=float)
        inside = np.clip(r_arr, r_samples[0], r_last)
        with np.errstate(divide="ignore"):
            continued = 1.0 + c_last / np.where(r_arr > 0.0, r_arr * r_arr, 1.0)
        out = np.where(r_arr > r_last, continued, interp(inside))
        return float(out) if np.ndim(r) == 0 else out

    return evaluate


def build_barrier_pair(
    prescription: DirectionalPrescription,
    eps0: Optional[float] = None,
    tol: float = 1e-10,
    r_max: float = 40.0,
    delta: float = asymptotics.DEFAULT_DELTA,
    check_samples: int = 10_000,
) -> BarrierPair:
    """Run the full pipeline and solve the two radial barrier problems.

    Raises NotIntegrable when either smoothed envelope fails the convergence
    classification, and propagates envelope or fit failures from the stages.
    """
    n = prescription.dimension
    smooth_end = int(math.ceil(r_max)) + 3
    grid = np.arange(0.0, smooth_end + _GRID_STEP, _GRID_STEP)

    hm_raw, hp_raw, count = _stabilized_envelopes(prescription, grid)
    hm_norm, hp_norm = positive_part_normalize(hm_raw, hp_raw)
    if eps0 is None:
        eps0 = min(0.05, 0.5 * float(np.min(hp_norm)))
    hm_marg, hp_marg = add_margins(hm_norm, hp_norm, eps0, grid)

    tail_from = smooth_end - 2
    tail_minus = _margined_envelope_tail(prescription, count, eps0, "sup", float(tail_from) - 1.0)
    tail_plus = _margined_envelope_tail(prescription, count, eps0, "inf", float(tail_from) - 1.0)
    blend_minus = smooth_blend(grid, hm_marg, eps0, tail=tail_minus, tail_from=tail_from)
    blend_plus = smooth_blend(grid, hp_marg, eps0, tail=tail_plus, tail_from=tail_from)

    flat_samples = grid[grid > 0.0]
    g_minus_fn = flatten_near_zero(blend_minus, "sup", flat_samples, limit=1.0)
    g_plus_fn = flatten_near_zero(blend_plus, "inf", flat_samples, limit=1.0)

    g_minus = RadialPrescription(
        dimension=n, evaluate=g_minus_fn, flat_near_zero=True,
        label=f"barrier-minus({prescription.label})",
    )
    g_plus = RadialPrescription(
        dimension=n, evaluate=g_plus_fn, flat_near_zero=True,
        label=f"barrier-plus({prescription.label})",
    )

    for name, g in (("g_minus", g_minus), ("g_plus", g_plus)):
        verdict = asymptotics.classify_boundedness(g)
        if verdict.classification != asymptotics.BOUNDED:
            raise NotIntegrable(f"{name} deficit integral classified {verdict.classification}")

    sol_minus = solve_radial(g_minus, r_max, tol, phi0=0.0)
    sol_plus = solve_radial(g_plus, r_max, tol, phi0=0.0)
    limit_minus = asymptotics.estimate_phi_limit(sol_minus, g_minus, delta=delta)
    limit_plus = asymptotics.estimate_phi_limit(sol_plus, g_plus, delta=delta)
    norm_minus, norm_plus = limit_minus.estimate, limit_plus.estimate
    phi_minus = replace(sol_minus, phi=sol_minus.phi - norm_minus, phi0=sol_minus.phi0 - norm_minus)
    phi_plus = replace(sol_plus, phi=sol_plus.phi - norm_plus, phi0=sol_plus.phi0 - norm_plus)

    diagnostics = _diagnose(
        prescription, grid, hm_marg, hp_marg,
        blend_minus, blend_plus, g_minus_fn, g_plus_fn, eps0, r_max, check_samples,
    )
    diagnostics["sampler_nodes_per_sphere"] = count
    pair = BarrierPair(
        g_minus=g_minus,
        g_plus=g_plus,
        phi_minus=phi_minus,
        phi_plus=phi_plus,
        eps0=eps0,
        normalization_constants=(norm_minus, norm_plus),
        limit_minus=limit_minus,
        limit_plus=limit_plus,
        diagnostics=diagnostics,
    )
    _enforce_invariants(pair, hm_raw, hp_raw, grid)
    return pair


def _diagnose(
    prescription, grid, hm_marg, hp_marg,
    blend_minus, blend_plus, g_minus_fn, g_plus_fn, eps0, r_max, check_samples,
):
    """Dense sample checks: smoothing budget and the defining barrier inequalities."""
    dense = np.linspace(0.0, float(grid[-1]) - 1.0, max(check_samples, 100))
    budget = margin_profile(dense, eps0)
    err_minus = np.abs(blend_minus(dense) - np.interp(dense, grid, hm_marg))
    err_plus = np.abs(blend_plus(dense) - np.interp(dense, grid, hp_marg))

    n_dirs = max(int(math.isqrt(check_samples)), 8)
    radii = np.linspace(0.0, r_max, max(check_samples // n_dirs, 8) + 1)
    min_margin_minus = math.inf
    min_margin_plus = math.inf
    points_checked = 0
    for r in radii:
        gm = g_minus_fn(float(r))
        gp = g_plus_fn(float(r))
        for x in sphere_points(prescription.dimension, float(r), n_dirs):
            h = prescription(x)
            min_margin_minus = min(min_margin_minus, gm - h)
            min_margin_plus = min(min_margin_plus, h - gp)
            points_checked += 1
    return {
        "smooth_error_max_minus": float(np.max(err_minus)),
        "smooth_error_max_plus": float(np.max(err_plus)),
        "smooth_budget_violation": float(np.max(np.maximum(err_minus, err_plus) - budget)),
        "barrier_margin_minus": float(min_margin_minus),
        "barrier_margin_plus": float(min_margin_plus),
        "barrier_points_checked": points_checked,
    }


def _enforce_invariants(pair: BarrierPair, hm_raw, hp_raw, grid):
    g_minus_grid = pair.g_minus(grid)
    g_plus_grid = pair.g_plus(grid)
    if np.any(g_minus_grid < hm_raw - 1e-12):
        raise RadialSigma2Error("smoothed lower-barrier prescription dipped below the raw envelope")
    if np.any(g_plus_grid > hp_raw + 1e-12):
        raise RadialSigma2Error("smoothed upper-barrier prescription exceeded the raw envelope")
    if float(np.max(pair.phi_minus.phi)) > 1e-9 or float(np.min(pair.phi_plus.phi)) < -1e-9:
        raise RadialSigma2Error("normalized barriers are not ordered around zero")
    for sol, limit in ((pair.phi_minus, pair.limit_minus), (pair.phi_plus, pair.limit_plus)):
        bound = max(abs(limit.tail_envelope[0]), abs(limit.tail_envelope[1])) + 1e-12
        if abs(float(sol.phi[-1])) > bound:
            raise RadialSigma2Error("normalized barrier does not vanish within its tail envelope")
