"""Curvature data: radial and direction-dependent prescriptions h.

A radial prescription is a positive function of the hyperbolic radius r; a
directional prescription is a positive function on the hyperboloid sampled
through sphere quadrature.  Built-in families cover both branches of the
boundedness dichotomy plus the directional case used by the barrier pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import NonPositivePrescription
from .lorentz import HyperbolicPoint, validate_dimension

CLOSED_FORM = "closed-form"
TABULATED = "tabulated-with-monotone-cubic-interpolation"


@dataclass
class RadialPrescription:
    """Positive curvature datum h(r) with its dimension and tail metadata."""

    dimension: int
    evaluate: Callable[[float], float]
    kind: str = CLOSED_FORM
    limit_at_infinity: float = 1.0
    flat_near_zero: bool = False
    label: str = ""

    def __post_init__(self):
        self.dimension = validate_dimension(self.dimension)
        if self.kind not in (CLOSED_FORM, TABULATED):
            raise ValueError(f"unknown prescription kind {self.kind!r}")

    def __call__(self, r):
        """Evaluate h at scalar or array r, enforcing positivity."""
        r_arr = np.asarray(r, dtype=float)
        values = np.asarray(self.evaluate(r_arr), dtype=float)
        if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
            bad = r_arr if np.ndim(r_arr) == 0 else r_arr[(~np.isfinite(values)) | (values <= 0.0)]
            raise NonPositivePrescription(f"h({bad}) is not a positive finite value")
        if np.ndim(r) == 0:
            return float(values)
        return values

    def beta(self, r):
        """Tail variable 1 - h(r)^2."""
        h = self(r)
        return 1.0 - h * h

    @classmethod
    def from_table(
        cls,
        dimension: int,
        r_samples,
        h_samples,
        limit_at_infinity: float = 1.0,
        flat_near_zero: bool = False,
        label: str = "",
    ) -> "RadialPrescription":
        """Monotone-cubic interpolation of samples; holds the last value beyond the grid."""
        r_samples = np.asarray(r_samples, dtype=float)
        h_samples = np.asarray(h_samples, dtype=float)
        if r_samples.ndim != 1 or r_samples.size < 2:
            raise ValueError("need at least two samples")
        if r_samples[0] != 0.0:
            raise ValueError("first sample must sit at r = 0")
        if np.any(np.diff(r_samples) <= 0.0):
            raise ValueError("sample grid must be strictly increasing")
        if np.any(h_samples <= 0.0):
            raise NonPositivePrescription("tabulated h must be positive")
        interp = PchipInterpolator(r_samples, h_samples, extrapolate=False)
        r_last, h_last = float(r_samples[-1]), float(h_samples[-1])

        def evaluate(r):
            r = np.asarray(r, dtype=float)
            clipped = np.minimum(r, r_last)
            return np.where(r >= r_last, h_last, interp(np.clip(clipped, 0.0, r_last)))

        return cls(
            dimension=dimension,
            evaluate=evaluate,
            kind=TABULATED,
            limit_at_infinity=limit_at_infinity,
            flat_near_zero=flat_near_zero,
            label=label or "tabulated",
        )


@dataclass
class DirectionalPrescription:
    """Positive curvature datum h(x) on the hyperboloid with a sphere sampler."""

    dimension: int
    evaluate: Callable[[HyperbolicPoint], float]
    sphere_nodes: int = 64
    label: str = ""

    def __post_init__(self):
        self.dimension = validate_dimension(self.dimension)
        self.sphere_nodes = max(int(self.sphere_nodes), 2 * self.dimension**2)

    def __call__(self, x: HyperbolicPoint) -> float:
        value = float(self.evaluate(x))
        if not math.isfinite(value) or value <= 0.0:
            raise NonPositivePrescription(f"h at chart {x.chart} is not positive")
        return value


def as_directional(prescription: RadialPrescription, sphere_nodes: int = 64) -> DirectionalPrescription:
    """View a radial prescription as a (direction-independent) one on the hyperboloid."""
    return DirectionalPrescription(
        dimension=prescription.dimension,
        evaluate=lambda x: prescription(x.radius()),
        sphere_nodes=sphere_nodes,
        label=prescription.label,
    )


def sphere_directions(n: int, count: int) -> np.ndarray:
    """Deterministic low-discrepancy direction set on S^{n-1}, shape (count, n).

    n = 2 uses equal angles, n = 3 the Fibonacci sphere; higher n falls back to
    seeded Gaussian directions with antithetic pairing (seed fixed, recorded by
    callers that persist artifacts).
    """
    validate_dimension(n)
    count = int(count)
    if count < 2:
        raise ValueError("need at least two directions")
    if n == 2:
        theta = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if n == 3:
        golden = (1.0 + math.sqrt(5.0)) / 2.0
        k = np.arange(count)
        z = 1.0 - (2.0 * k + 1.0) / count
        phi = 2.0 * np.pi * k / golden
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    rng = np.random.default_rng(20240 + n)
    half = (count + 1) // 2
    raw = rng.standard_normal((half, n))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    return np.vstack([raw, -raw])[:count]


def sphere_points(n: int, r: float, count: int) -> list[HyperbolicPoint]:
    """Points on the distance-r sphere of the hyperboloid: x' = sinh(r) * omega."""
    if r < 0.0:
        raise ValueError("radius must be nonnegative")
    if r == 0.0:
        return [HyperbolicPoint.origin(n)]
    radius = math.sinh(r)
    return [HyperbolicPoint(radius * omega) for omega in sphere_directions(n, count)]


# --- built-in families ----------------------------------------------------


def constant_family(n: int, value: float = 1.0) -> RadialPrescription:
    if value <= 0.0:
        raise NonPositivePrescription("constant prescription must be positive")
    return RadialPrescription(
        dimension=n,
        evaluate=lambda r: np.full_like(np.asarray(r, dtype=float), value, dtype=float),
        limit_at_infinity=value,
        flat_near_zero=True,
        label=f"constant(value={value:g})",
    )


def power_deficit_family(n: int, c: float = 0.3, p: float = 2.0) -> RadialPrescription:
    """h = 1 - c (1+r)^{-p}; h <= 1, integrable deficit iff p > 1."""
    if not 0.0 <= c < 1.0:
        raise ValueError("need 0 <= c < 1 for positivity")
    return RadialPrescription(
        dimension=n,
        evaluate=lambda r: 1.0 - c * (1.0 + np.asarray(r, dtype=float)) ** (-p),
        label=f"power-deficit(c={c:g}, p={p:g})",
    )


def power_excess_family(n: int, c: float = 0.3, p: float = 2.0) -> RadialPrescription:
    """h = 1 + c (1+r)^{-p}; h >= 1."""
    if c < 0.0:
        raise ValueError("need c >= 0")
    return RadialPrescription(
        dimension=n,
        evaluate=lambda r: 1.0 + c * (1.0 + np.asarray(r, dtype=float)) ** (-p),
        label=f"power-excess(c={c:g}, p={p:g})",
    )


def even_deficit_family(n: int, c: float = 0.3, p: float = 2.0) -> RadialPrescription:
    """h = 1 - c (1+r^2)^{-p/2}: same tail class as the power deficit but even
    in r, so the graph stays smooth at the pole (h'(0) = 0)."""
    if not 0.0 <= c < 1.0:
        raise ValueError("need 0 <= c < 1 for positivity")

    def evaluate(r):
        r = np.asarray(r, dtype=float)
        return 1.0 - c * (1.0 + r * r) ** (-p / 2.0)

    return RadialPrescription(dimension=n, evaluate=evaluate, label=f"even-deficit(c={c:g}, p={p:g})")


def bertrand_family(n: int, c: float = 0.1, q: float = 2.0) -> RadialPrescription:
    """h = 1 - c (1+r)^{-1} log(e+r)^{-q}; deficit integrable iff q > 1."""
    if not 0.0 <= c < 1.0:
        raise ValueError("need 0 <= c < 1 for positivity")

    def evaluate(r):
        r = np.asarray(r, dtype=float)
        return 1.0 - c / (1.0 + r) / np.log(np.e + r) ** q

    return RadialPrescription(dimension=n, evaluate=evaluate, label=f"bertrand(c={c:g}, q={q:g})")


def directional_family(n: int, amplitude: float = 0.2, p: float = 2.0, sphere_nodes: int = 64) -> DirectionalPrescription:
    """h(x) = 1 + amplitude (1+r)^{-p} x_1 / cosh(r); the barrier-pipeline test family."""
    if not 0.0 <= amplitude < 1.0:
        raise ValueError("need 0 <= amplitude < 1 for positivity")

    def evaluate(x: HyperbolicPoint) -> float:
        r = x.radius()
        return 1.0 + amplitude * (1.0 + r) ** (-p) * float(x.chart[0]) / math.cosh(r)

    return DirectionalPrescription(
        dimension=n,
        evaluate=evaluate,
        sphere_nodes=sphere_nodes,
        label=f"directional(amplitude={amplitude:g}, p={p:g})",
    )


FAMILY_BUILDERS = {
    "constant": constant_family,
    "power-deficit": power_deficit_family,
    "power-excess": power_excess_family,
    "even-deficit": even_deficit_family,
    "bertrand": bertrand_family,
    "directional": directional_family,
}

FAMILY_PARAMS = {
    "constant": {"value"},
    "power-deficit": {"c", "p"},
    "power-excess": {"c", "p"},
    "even-deficit": {"c", "p"},
    "bertrand": {"c", "q"},
    "directional": {"amplitude", "p", "sphere_nodes"},
}


def build_family(name: str, n: int, **params):
    """Instantiate a built-in family by name, rejecting unknown parameters."""
    if name not in FAMILY_BUILDERS:
        raise ValueError(f"unknown prescription family {name!r}; choose from {sorted(FAMILY_BUILDERS)}")
    allowed = FAMILY_PARAMS[name]
    unknown = set(params) - allowed
    if unknown:
        raise ValueError(f"unknown parameters {sorted(unknown)} for family {name!r}")
    return FAMILY_BUILDERS[name](n, **params)
