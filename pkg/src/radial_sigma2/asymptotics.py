"""Tail analysis of radial solutions: linearization, boundedness, limits.

With eps = r - s and beta = 1 - h^2, the radial ODE linearizes at infinity to
(n-1) eps + eps' = (n/2) beta up to o(eps).  For any slack delta > 0 the two
linear comparison ODEs with coefficients (n-1 -+ delta) bracket eps beyond the
radius where the measured linearization defect drops below delta; integrating
them forward brackets the remaining tail of phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .errors import EnvelopeInvalid
from .ode import RadialSolution, grid_derivative
from .prescriptions import RadialPrescription

BOUNDED = "Bounded"
UNBOUNDED = "Unbounded"
INCONCLUSIVE = "Inconclusive"

RESIDUAL_FLOOR = 1e-14
DEFAULT_DELTA = 0.1
DEFAULT_R_PROBE = 10.0
DEFAULT_THRESHOLD = 0.05
_HARMONIC_FLOOR = 1e-3
_DECAY_RATIO = 0.97
_TAIL_EXTENSION = 60.0
_TAIL_STEP = 0.05


def linearization_residuals(solution: RadialSolution) -> np.ndarray:
    """Relative defect |eps' + (n-1) eps - (n/2) beta| / max(|beta|, |eps|, floor)."""
    n = solution.dimension
    eps = solution.eps
    beta = solution.prescription.beta(solution.r)
    eps_prime = grid_derivative(solution.r, eps, points=3)
    defect = np.abs(eps_prime + (n - 1) * eps - 0.5 * n * beta)
    scale = np.maximum(np.maximum(np.abs(beta), np.abs(eps)), RESIDUAL_FLOOR)
    return defect / scale


def verify_asymptotic_ode(
    solution: RadialSolution,
    prescription: RadialPrescription,
    r_min: float,
) -> float:
    """Max relative linearization residual over grid nodes with r >= r_min."""
    if prescription is not solution.prescription:
        solution = _with_prescription(solution, prescription)
    residual = linearization_residuals(solution)
    mask = solution.r >= r_min
    if not np.any(mask):
        raise ValueError(f"solution does not extend past r_min = {r_min}")
    return float(np.max(residual[mask]))


def _with_prescription(solution: RadialSolution, prescription: RadialPrescription) -> RadialSolution:
    return replace(solution, prescription=prescription)


@dataclass
class BoundednessVerdict:
    """Outcome of the improper-integral dichotomy on nested dyadic windows."""

    classification: str
    windows: np.ndarray
    increments: np.ndarray
    total: float
    remaining_estimate: Optional[float]
    harmonic_constant: Optional[float]
    sign: int


def _window_integral(prescription: RadialPrescription, a: float, b: float) -> float:
    """Composite Simpson of |1 - h| on [a, b]."""
    panels = max(64, min(8192, int((b - a) / 0.05)))
    x = np.linspace(a, b, 2 * panels + 1)
    y = np.abs(1.0 - prescription(x))
    h = (b - a) / (2 * panels)
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1::2].sum() + 2.0 * y[2:-1:2].sum()))


def classify_boundedness(
    prescription: RadialPrescription,
    r_probe: float = DEFAULT_R_PROBE,
    threshold: float = DEFAULT_THRESHOLD,
) -> BoundednessVerdict:
    """Classify convergence of int |1-h| dr from increments on [0, r_probe 2^k].

    Bounded: the last dyadic increments decay (ratio <= 0.97) and their
    geometric extrapolation of the remaining tail stays below threshold.
    Unbounded: increments do not decay and the harmonic constant fitted on the
    last two windows exceeds a floor.  Everything else, including sign changes
    of 1 - h on the probe range, is Inconclusive.
    """
    if r_probe <= 0.0 or threshold <= 0.0:
        raise ValueError("r_probe and threshold must be positive")
    windows = r_probe * 2.0 ** np.arange(7)

    # one-signedness of 1 - h on the probed tail
    samples = prescription(np.geomspace(r_probe, windows[-1], 512))
    deficit = 1.0 - samples
    has_pos = bool(np.any(deficit > 1e-12))
    has_neg = bool(np.any(deficit < -1e-12))
    if has_pos and has_neg:
        return BoundednessVerdict(INCONCLUSIVE, windows, np.array([]), math.nan, None, None, 0)
    sign = 1 if has_pos else (-1 if has_neg else 0)

    edges = np.concatenate([[0.0], windows])
    increments = np.array(
        [_window_integral(prescription, edges[k], edges[k + 1]) for k in range(edges.size - 1)]
    )
    total = float(np.sum(increments))

    if np.all(increments < 1e-13):
        return BoundednessVerdict(BOUNDED, windows, increments, total, 0.0, None, sign)

    tail = increments[-3:]
    ratios = tail[1:] / np.maximum(tail[:-1], 1e-300)
    decaying = bool(np.all(ratios <= _DECAY_RATIO))
    if decaying:
        rho = float(min(ratios[-1], _DECAY_RATIO))
        remaining = float(increments[-1] * rho / (1.0 - rho))
        if remaining < threshold:
            return BoundednessVerdict(BOUNDED, windows, increments, total, remaining, None, sign)
        return BoundednessVerdict(INCONCLUSIVE, windows, increments, total, remaining, None, sign)

    harmonic = float(np.mean(increments[-2:]) / math.log(2.0))
    if harmonic > _HARMONIC_FLOOR and increments[-1] >= 0.5 * increments[-2]:
        return BoundednessVerdict(UNBOUNDED, windows, increments, total, None, harmonic, sign)
    return BoundednessVerdict(INCONCLUSIVE, windows, increments, total, None, harmonic, sign)


@dataclass
class PhiLimitEstimate:
    """phi limit with a numeric bracket on the unintegrated tail correction."""

    estimate: float
    tail_envelope: tuple[float, float]
    limit_envelope: tuple[float, float]
    delta: float
    r_delta: float
    r_big: float
    beta_tail_integral: float

    def __iter__(self):
        return iter((self.estimate, self.tail_envelope))

    @property
    def width(self) -> float:
        return self.tail_envelope[1] - self.tail_envelope[0]


def _etd_step(u: float, f0: float, f1: float, gamma: float, h: float) -> float:
    """Exact exponential step of u' = f - gamma u with f linear on the step."""
    x = gamma * h
    ex = math.exp(-x)
    a = (1.0 - ex) / gamma
    b = (1.0 - ex) / gamma - (1.0 - (1.0 + x) * ex) / (gamma * gamma * h)
    return u * ex + f0 * (a - b) + f1 * b


def _propagate_envelope(r_nodes, f_nodes, gamma, u0):
    """March the comparison ODE along the nodes; returns u at every node."""
    u = np.empty(r_nodes.size)
    u[0] = u0
    for k in range(r_nodes.size - 1):
        h = r_nodes[k + 1] - r_nodes[k]
        u[k + 1] = _etd_step(u[k], f_nodes[k], f_nodes[k + 1], gamma, h)
    return u


def estimate_phi_limit(
    solution: RadialSolution,
    prescription: RadialPrescription,
    delta: float = DEFAULT_DELTA,
) -> PhiLimitEstimate:
    """Bracket lim phi with the paper-kernel comparison ODEs seeded at r_max.

    The bracket is validated against the measured eps on the second half of
    the solve (EnvelopeInvalid when the measured curve escapes it), integrated
    numerically to r_max + 60, and closed with the Fubini identity
    int exp-kernel * beta = int beta / gamma for the improper remainder.
    """
    if solution.phi is None:
        raise ValueError("phi not populated; run phi_quadrature first")
    n = solution.dimension
    if not 0.0 < delta < n - 1:
        raise ValueError(f"delta must lie in (0, n-1), got {delta}")
    gamma_lo = n - 1.0 - delta  # slow kernel: upper envelope of |eps|
    gamma_hi = n - 1.0 + delta

    r = solution.r
    r_max = solution.r_max
    beta = prescription.beta(r)

    # sign of the tail regime; mixed signs invalidate the comparison setup
    tail_mask = r >= 0.5 * r_max
    tail_beta = beta[tail_mask]
    has_pos = bool(np.any(tail_beta > 1e-12))
    has_neg = bool(np.any(tail_beta < -1e-12))
    if has_pos and has_neg:
        raise EnvelopeInvalid("beta changes sign on the tail; envelopes do not apply")
    sgn = 1.0 if (has_pos or not has_neg) else -1.0

    eps_t = sgn * solution.eps
    beta_t = sgn * beta
    forcing = 0.5 * n * beta_t

    # r_delta: first node past which the measured linearization defect < delta
    residual = linearization_residuals(solution)
    bad = np.where(residual >= delta)[0]
    idx_delta = int(bad[-1]) + 1 if bad.size else 0
    if idx_delta >= r.size or r[idx_delta] > 0.9 * r_max:
        raise EnvelopeInvalid(
            f"linearization defect stays above delta={delta} too close to r_max={r_max:.3g}; "
            "increase delta or r_max"
        )
    r_delta = float(r[idx_delta])

    # validation: seed both kernels mid-tail and check the measured eps stays inside
    idx_seed = int(np.searchsorted(r, max(r_delta, 0.5 * r_max)))
    idx_seed = min(idx_seed, r.size - 2)
    seg = slice(idx_seed, r.size)
    u_slow = _propagate_envelope(r[seg], forcing[seg], gamma_lo, eps_t[idx_seed])
    u_fast = _propagate_envelope(r[seg], forcing[seg], gamma_hi, eps_t[idx_seed])
    hi = np.maximum(u_slow, u_fast)
    lo = np.minimum(u_slow, u_fast)
    slack = 1e-10 + 1e-6 * np.maximum(np.abs(hi), np.abs(lo))
    inside = (eps_t[seg] >= lo - slack) & (eps_t[seg] <= hi + slack)
    if not bool(np.all(inside)):
        worst = int(np.argmin(inside))
        raise EnvelopeInvalid(
            f"measured eps at r={r[seg][worst]:.4g} escaped its envelope bracket; "
            "delta too small or r_max too small"
        )

    # tail march from r_max
    r_ext = np.arange(r_max, r_max + _TAIL_EXTENSION + _TAIL_STEP, _TAIL_STEP)
    beta_ext = sgn * prescription.beta(r_ext)
    f_ext = 0.5 * n * beta_ext
    seed = float(eps_t[-1])
    u_hi = _propagate_envelope(r_ext, f_ext, gamma_lo, seed)
    u_lo = _propagate_envelope(r_ext, f_ext, gamma_hi, seed)
    steps = np.diff(r_ext)
    tanh_hi = np.tanh(u_hi)
    tanh_lo = np.tanh(u_lo)
    t_hi = float(np.sum(0.5 * steps * (tanh_hi[:-1] + tanh_hi[1:])))
    t_lo = float(np.sum(0.5 * steps * (tanh_lo[:-1] + tanh_lo[1:])))

    # improper remainder past r_big via int_R^inf beta
    r_big = float(r_ext[-1])
    i_beta, i_err = _beta_tail_integral(prescription, sgn, r_big)
    i_hi = max(i_beta + i_err, 0.0)
    i_lo = max(i_beta - i_err, 0.0)
    cap = max(float(u_hi[-1]), 0.5 * n * max(float(beta_ext[-1]), 0.0) / gamma_lo, 0.0)
    rest_hi = max(float(u_hi[-1]), 0.0) / gamma_lo + 0.5 * n * i_hi / gamma_lo
    rest_lo = (float(u_lo[-1]) / gamma_hi + 0.5 * n * i_lo / gamma_hi) * (1.0 - cap * cap / 3.0)

    solver_slop = solution.tolerance * r_max + (solution.quad_error or 0.0)
    tail_lo_t = t_lo + min(rest_lo, rest_hi) - solver_slop
    tail_hi_t = t_hi + rest_hi + solver_slop

    if sgn >= 0.0:
        tail_envelope = (tail_lo_t, tail_hi_t)
    else:
        tail_envelope = (-tail_hi_t, -tail_lo_t)
    phi_end = float(solution.phi[-1])
    limit_envelope = (phi_end - tail_envelope[1], phi_end - tail_envelope[0])
    estimate = 0.5 * (limit_envelope[0] + limit_envelope[1])
    return PhiLimitEstimate(
        estimate=estimate,
        tail_envelope=tail_envelope,
        limit_envelope=limit_envelope,
        delta=delta,
        r_delta=r_delta,
        r_big=r_big,
        beta_tail_integral=i_beta,
    )


def _beta_tail_integral(prescription, sgn: float, r_big: float) -> tuple[float, float]:
    """(integral, error bound) for int_{r_big}^inf sgn * beta dr."""
    try:
        value, err = quad(lambda t: sgn * (1.0 - prescription(t) ** 2), r_big, np.inf, limit=200)
        if math.isfinite(value) and err < 0.1 * max(abs(value), 1e-12):
            return float(value), float(err)
    except Exception:
        pass
    # power-law fallback with generous slack
    b1 = sgn * (1.0 - prescription(r_big / 2.0) ** 2)
    b2 = sgn * (1.0 - prescription(r_big) ** 2)
    if b2 <= 0.0 or b1 <= b2:
        return 0.0, 0.0
    p_hat = math.log(b1 / b2) / math.log(2.0)
    if p_hat <= 1.05:
        raise EnvelopeInvalid(f"beta tail decays too slowly (fitted exponent {p_hat:.3f})")
    value = b2 * r_big / (p_hat - 1.0)
    return value, 0.4 * value


@dataclass
class TailFit:
    """Stationary-balance fit eps ~ [n/(2(n-1))] beta on the last stretch."""

    ratio: Optional[float]
    drift: Optional[float]
    stationary_ratio: float
    s_prime_max_dev: float
    s_prime_converged: bool
    skipped: bool


def tail_exponent_fit(solution: RadialSolution, prescription: RadialPrescription) -> TailFit:
    """Fit eps/beta on the last decade of the run and check s' -> 1."""
    n = solution.dimension
    r = solution.r
    window = r >= 0.9 * solution.r_max
    dev = float(np.max(np.abs(solution.s_prime[window] - 1.0)))
    stationary = n / (2.0 * (n - 1.0))
    beta = prescription.beta(r[window])
    if np.max(np.abs(beta)) < 1e-12:
        return TailFit(None, None, stationary, dev, dev < 0.01, True)
    ratios = solution.eps[window] / beta
    ratio = float(np.mean(ratios))
    drift = float((ratios[-1] - ratios[0]) / ratio) if ratio != 0.0 else None
    return TailFit(ratio, drift, stationary, dev, dev < 0.01, False)


@dataclass
class AsymptoticsReport:
    """Aggregated tail diagnostics for one radial solve."""

    beta: np.ndarray
    eps: np.ndarray
    linearization_residual: np.ndarray
    classification: str
    phi_limit_estimate: Optional[float]
    tail_envelope: Optional[tuple[float, float]]
    delta_used: float
    verdict: BoundednessVerdict
    tail_fit: Optional[TailFit]


def analyze(
    solution: RadialSolution,
    prescription: RadialPrescription,
    delta: float = DEFAULT_DELTA,
    r_probe: float = DEFAULT_R_PROBE,
    threshold: float = DEFAULT_THRESHOLD,
) -> AsymptoticsReport:
    """Classification plus, where Bounded, the envelope-bracketed phi limit."""
    verdict = classify_boundedness(prescription, r_probe=r_probe, threshold=threshold)
    residual = linearization_residuals(solution)
    estimate = None
    envelope = None
    fit = None
    if verdict.classification == BOUNDED and solution.phi is not None:
        limit = estimate_phi_limit(solution, prescription, delta=delta)
        estimate = limit.estimate
        envelope = limit.tail_envelope
        fit = tail_exponent_fit(solution, prescription)
    return AsymptoticsReport(
        beta=prescription.beta(solution.r),
        eps=solution.eps,
        linearization_residual=residual,
        classification=verdict.classification,
        phi_limit_estimate=estimate,
        tail_envelope=envelope,
        delta_used=delta,
        verdict=verdict,
        tail_fit=fit,
    )
