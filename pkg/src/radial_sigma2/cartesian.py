"""Independent Cartesian-graph oracle for the curvature prescription.

A radial solution is resampled as a graph u over a lattice in R^n, the shape
operator is built from centered finite differences (induced metric
g = I - Du Du^T, second fundamental form D^2u / sqrt(1 - |Du|^2), future
normal normalization: the unit hyperboloid has kappa_i = +1), and sigma_2 of
its eigenvalues is compared against the dilation-invariant right-hand side.
Nothing here touches the radial ODE code path; agreement is evidence, not
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InversionFailed, MetricDegenerate, NotInFutureCone, OutOfRange
from .lorentz import CurvatureSpectrum, SpacetimePoint, validate_dimension
from .ode import RadialSolution
from .prescriptions import DirectionalPrescription, RadialPrescription
from .lorentz import HyperbolicPoint

Prescription = Union[RadialPrescription, DirectionalPrescription]

SPACELIKE_FLOOR = 1e-10


@dataclass
class CartesianPatch:
    """Sampled spacelike graph u over a regular lattice in R^n."""

    lower: np.ndarray  # lattice corner, shape (n,)
    spacing: float
    u: np.ndarray  # values, n-dimensional array

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        validate_dimension(self.dimension)
        if not np.all(np.isfinite(self.u)):
            raise ValueError("patch contains non-finite values")
        if np.any(self.u <= self.radius_grid()):
            raise NotInFutureCone("patch leaves the open future cone (u <= |X'| somewhere)")

    @property
    def dimension(self) -> int:
        return self.u.ndim

    @property
    def shape(self) -> tuple:
        return self.u.shape

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.lower[axis] + self.spacing * np.arange(self.u.shape[axis])

    def coordinate_grids(self) -> list[np.ndarray]:
        axes = [self.axis_coords(i) for i in range(self.dimension)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def radius_grid(self) -> np.ndarray:
        grids = self.coordinate_grids()
        return np.sqrt(sum(g * g for g in grids))

    def interior(self, values: np.ndarray) -> np.ndarray:
        core = tuple(slice(1, -1) for _ in range(self.dimension))
        return values[core]

    def scaled(self, factor: float) -> "CartesianPatch":
        """Ambient dilation X -> factor * X of the sampled graph."""
        if factor <= 0.0:
            raise ValueError("dilation factor must be positive")
        return CartesianPatch(self.lower * factor, self.spacing * factor, self.u * factor)

    def corrupted(self, amplitude: float) -> "CartesianPatch":
        """Checkerboard high-frequency perturbation (negative-control input)."""
        idx_sum = sum(np.meshgrid(*[np.arange(m) for m in self.shape], indexing="ij"))
        return CartesianPatch(self.lower.copy(), self.spacing, self.u + amplitude * (-1.0) ** idx_sum)


def to_cartesian(solution: RadialSolution, box: float, spacing: float) -> CartesianPatch:
    """Resample a radial solution as the graph u(X') on [-box, box]^n.

    Inverts the radial map |X'| = e^{phi(r)} sinh r per lattice node by
    bisection plus Newton polish; the inversion residual must reach 1e-12.
    """
    if solution.phi is None:
        raise ValueError("phi not populated; run phi_quadrature first")
    if box <= 0.0 or spacing <= 0.0:
        raise ValueError("box and spacing must be positive")
    n = solution.dimension
    steps = int(round(2.0 * box / spacing))
    axis = -box + spacing * np.arange(steps + 1)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    radius = np.sqrt(sum(g * g for g in grids))

    r_cap = solution.r_max
    reach = math.exp(solution.phi_at(r_cap)) * math.sinh(r_cap)
    if float(np.max(radius)) >= reach:
        raise OutOfRange(
            f"patch needs |X'| up to {np.max(radius):.4g} but the solution reaches only {reach:.4g}"
        )

    flat = radius.reshape(-1)
    r = _invert_radial_map(solution, flat)
    u = np.hypot(np.exp(solution.phi_at(r)), flat).reshape(radius.shape)
    return CartesianPatch(np.full(n, -box), spacing, u)


def _invert_radial_map(solution: RadialSolution, targets: np.ndarray) -> np.ndarray:
    """Solve e^{phi(r)} sinh(r) = target for each entry (map is increasing)."""
    lo = np.zeros_like(targets)
    hi = np.full_like(targets, solution.r_max)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        value = np.exp(solution.phi_at(mid)) * np.sinh(mid)
        high = value > targets
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    r = 0.5 * (lo + hi)
    for _ in range(3):  # Newton polish
        phi = solution.phi_at(r)
        eps = r - solution.s_at(r)
        f = np.exp(phi) * np.sinh(r) - targets
        fp = np.exp(phi) * (np.cosh(r) - np.tanh(eps) * np.sinh(r))
        r = np.clip(r - f / np.maximum(fp, 1e-300), 0.0, solution.r_max)
    residual = np.abs(np.exp(solution.phi_at(r)) * np.sinh(r) - targets)
    worst = float(np.max(residual / np.maximum(1.0, targets)))
    if worst > 1e-12:
        raise InversionFailed(f"radial-map inversion residual {worst:.3e} exceeds 1e-12")
    return r


def _roll(values: np.ndarray, axis: int, offset: int) -> np.ndarray:
    return np.roll(values, -offset, axis=axis)


def patch_jets(patch: CartesianPatch) -> tuple[np.ndarray, np.ndarray]:
    """Centered first and second differences at interior nodes.

    Returns (Du, D2u) with shapes (N, n) and (N, n, n), N = interior count.
    Rolled-in wrap values never reach the interior crop.
    """
    u, h, n = patch.u, patch.spacing, patch.dimension
    grad = np.stack(
        [patch.interior((_roll(u, i, 1) - _roll(u, i, -1)) / (2.0 * h)) for i in range(n)],
        axis=-1,
    ).reshape(-1, n)
    hess = np.empty((grad.shape[0], n, n))
    for i in range(n):
        dii = patch.interior((_roll(u, i, 1) - 2.0 * u + _roll(u, i, -1)) / (h * h)).reshape(-1)
        hess[:, i, i] = dii
        for j in range(i + 1, n):
            cross = (
                _roll(_roll(u, i, 1), j, 1)
                - _roll(_roll(u, i, 1), j, -1)
                - _roll(_roll(u, i, -1), j, 1)
                + _roll(_roll(u, i, -1), j, -1)
            ) / (4.0 * h * h)
            dij = patch.interior(cross).reshape(-1)
            hess[:, i, j] = dij
            hess[:, j, i] = dij
    return grad, hess


def shape_spectra(patch: CartesianPatch) -> np.ndarray:
    """Principal curvatures at every interior node, shape (N, n), ascending."""
    du, d2u = patch_jets(patch)
    n = patch.dimension
    w2 = 1.0 - np.sum(du * du, axis=1)
    if np.any(w2 < SPACELIKE_FLOOR):
        worst = float(np.min(w2))
        raise MetricDegenerate(f"1 - |Du|^2 reached {worst:.3e}; graph not safely spacelike")
    w = np.sqrt(w2)
    b = d2u / w[:, None, None]
    # g^{-1/2} = I + (1/W - 1) dd^T/|d|^2, from g = I - dd^T
    d_norm2 = np.sum(du * du, axis=1)
    safe = np.where(d_norm2 > 0.0, d_norm2, 1.0)
    proj = du[:, :, None] * du[:, None, :] / safe[:, None, None]
    s_half = np.eye(n)[None, :, :] + (1.0 / w - 1.0)[:, None, None] * np.where(
        d_norm2[:, None, None] > 0.0, proj, 0.0
    )
    sym = s_half @ b @ s_half
    return np.linalg.eigvalsh(sym)


def sigma_fields(kappas: np.ndarray) -> np.ndarray:
    """Batched elementary symmetric functions: (N, n) kappas -> (N, n) sigmas."""
    count, n = kappas.shape
    e = np.zeros((count, n + 1))
    e[:, 0] = 1.0
    for i in range(n):
        k = kappas[:, i][:, None]
        e[:, 1 : i + 2] = e[:, 1 : i + 2] + k * e[:, 0 : i + 1]
    return e[:, 1:]


def discrete_shape_operator(patch: CartesianPatch, node: tuple) -> CurvatureSpectrum:
    """Curvature spectrum at one interior node from finite-difference jets."""
    n = patch.dimension
    idx = tuple(int(i) for i in node)
    if len(idx) != n or any(i < 1 or i >= patch.shape[k] - 1 for k, i in enumerate(idx)):
        raise OutOfRange(f"node {node} is not interior to the patch")
    u, h = patch.u, patch.spacing

    def at(offset):
        return u[tuple(i + o for i, o in zip(idx, offset))]

    center = tuple([0] * n)
    du = np.array([(at(_unit(n, i, 1)) - at(_unit(n, i, -1))) / (2 * h) for i in range(n)])
    d2 = np.empty((n, n))
    for i in range(n):
        d2[i, i] = (at(_unit(n, i, 1)) - 2.0 * at(center) + at(_unit(n, i, -1))) / (h * h)
        for j in range(i + 1, n):
            d2[i, j] = d2[j, i] = (
                at(_combo(n, i, 1, j, 1)) - at(_combo(n, i, 1, j, -1)) - at(_combo(n, i, -1, j, 1)) + at(_combo(n, i, -1, j, -1))
            ) / (4 * h * h)
    w2 = 1.0 - float(du @ du)
    if w2 < SPACELIKE_FLOOR:
        raise MetricDegenerate(f"1 - |Du|^2 = {w2:.3e} at node {node}")
    w = math.sqrt(w2)
    b = d2 / w
    d_norm2 = float(du @ du)
    if d_norm2 > 0.0:
        s_half = np.eye(n) + (1.0 / w - 1.0) * np.outer(du, du) / d_norm2
    else:
        s_half = np.eye(n)
    kappas = np.linalg.eigvalsh(s_half @ b @ s_half)
    return CurvatureSpectrum.from_kappas(kappas)


def _unit(n, i, sign):
    offset = [0] * n
    offset[i] = sign
    return tuple(offset)


def _combo(n, i, si, j, sj):
    offset = [0] * n
    offset[i] = si
    offset[j] = sj
    return tuple(offset)


def big_h(point: SpacetimePoint, prescription: Prescription) -> float:
    """Dilation-invariant right-hand side C(n,2)/rho^2 * h(X/rho)^2."""
    n = point.dimension
    rho_sq = point.height**2 - float(point.spatial @ point.spatial)
    if not point.in_future_cone() or rho_sq <= 0.0:
        raise NotInFutureCone("big_h needs a point inside the open future cone")
    rho = math.sqrt(rho_sq)
    x = HyperbolicPoint(point.spatial / rho)
    if isinstance(prescription, DirectionalPrescription):
        h = prescription(x)
    else:
        h = prescription(x.radius())
    return math.comb(n, 2) / rho_sq * h * h


def _big_h_field(patch: CartesianPatch, prescription: Prescription) -> np.ndarray:
    """big_h at interior nodes, vectorized where the prescription allows."""
    grids = [patch.interior(g) for g in patch.coordinate_grids()]
    u_in = patch.interior(patch.u)
    spatial_sq = sum(g * g for g in grids)
    rho_sq = u_in * u_in - spatial_sq
    if np.any(rho_sq <= 0.0):
        raise NotInFutureCone("patch interior leaves the future cone")
    n = patch.dimension
    if isinstance(prescription, RadialPrescription):
        radius = np.sqrt(spatial_sq) / np.sqrt(rho_sq)
        h = prescription(np.arcsinh(radius))
        return (math.comb(n, 2) / rho_sq * h * h).reshape(-1)
    flat_coords = np.stack([g.reshape(-1) for g in grids], axis=1)
    flat_u = u_in.reshape(-1)
    out = np.empty(flat_u.size)
    for k in range(flat_u.size):
        out[k] = big_h(SpacetimePoint(flat_coords[k], float(flat_u[k])), prescription)
    return out


def h2_residual_field(patch: CartesianPatch, prescription: Prescription) -> np.ndarray:
    """Relative defect |sigma_2(kappa) - H(X)| / H(X) at interior nodes."""
    kappas = shape_spectra(patch)
    sigma2 = sigma_fields(kappas)[:, 1]
    target = _big_h_field(patch, prescription)
    return np.abs(sigma2 - target) / target


def hyperboloid_bounds_check(patch: CartesianPatch, phi_min: float, phi_max: float) -> bool:
    """u_min <= u <= u_max for the hyperboloid graphs of the constant bounds."""
    if phi_min > phi_max:
        raise ValueError("phi_min must not exceed phi_max")
    radius_sq = patch.radius_grid() ** 2
    u_lo = np.sqrt(math.exp(2.0 * phi_min) + radius_sq)
    u_hi = np.sqrt(math.exp(2.0 * phi_max) + radius_sq)
    return bool(np.all(patch.u >= u_lo - 1e-12) and np.all(patch.u <= u_hi + 1e-12))


def admissibility_field(patch: CartesianPatch) -> tuple[float, float]:
    """(fraction of interior nodes with kappa in the sigma_2 cone, worst sigma_2)."""
    kappas = shape_spectra(patch)
    sigmas = sigma_fields(kappas)
    ok = (sigmas[:, 0] > 0.0) & (sigmas[:, 1] > 0.0)
    return float(np.mean(ok)), float(np.min(sigmas[:, 1]))
