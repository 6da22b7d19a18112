"""Minkowski and hyperbolic-space primitives shared by every other module.

Ambient space is R^n x R with the quadratic form |X'|^2 - X_{n+1}^2 and time
orientation given by the last coordinate.  The unit hyperboloid
|x'|^2 - x_{n+1}^2 = -1, x_{n+1} > 0 is the hyperbolic-space model; points on
it are stored by their chart x' only, with the height recomputed on demand so
the quadric invariant holds exactly and cannot drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotAdmissible, NotInFutureCone

MIN_DIMENSION = 2
MAX_DIMENSION = 16

ARCCOSH_CLAMP = 1e-12


def validate_dimension(n: int) -> int:
    n = int(n)
    if not MIN_DIMENSION <= n <= MAX_DIMENSION:
        raise ValueError(f"dimension must be in [{MIN_DIMENSION}, {MAX_DIMENSION}], got {n}")
    return n


@dataclass(frozen=True)
class SpacetimePoint:
    """A point X = (X', X_{n+1}) of the ambient Lorentzian space."""

    spatial: np.ndarray
    height: float

    def __post_init__(self):
        spatial = np.atleast_1d(np.asarray(self.spatial, dtype=float))
        validate_dimension(spatial.size)
        object.__setattr__(self, "spatial", spatial)
        object.__setattr__(self, "height", float(self.height))

    @property
    def dimension(self) -> int:
        return self.spatial.size

    def in_future_cone(self) -> bool:
        return self.height > float(np.linalg.norm(self.spatial))

    def scaled(self, factor: float) -> "SpacetimePoint":
        return SpacetimePoint(self.spatial * factor, self.height * factor)


@dataclass(frozen=True)
class HyperbolicPoint:
    """A point of the unit hyperboloid, stored by its chart x' in R^n."""

    chart: np.ndarray

    def __post_init__(self):
        chart = np.atleast_1d(np.asarray(self.chart, dtype=float))
        validate_dimension(chart.size)
        object.__setattr__(self, "chart", chart)

    @property
    def dimension(self) -> int:
        return self.chart.size

    @property
    def height(self) -> float:
        # sqrt(1 + |x'|^2), exact counterpart of the quadric constraint
        return math.hypot(1.0, float(np.linalg.norm(self.chart)))

    def as_spacetime(self) -> SpacetimePoint:
        return SpacetimePoint(self.chart.copy(), self.height)

    def radius(self) -> float:
        """Hyperbolic distance from the apex o (the point with x' = 0)."""
        return math.asinh(float(np.linalg.norm(self.chart)))

    @classmethod
    def origin(cls, n: int) -> "HyperbolicPoint":
        return cls(np.zeros(validate_dimension(n)))


def minkowski_inner(x, y) -> float:
    """Lorentzian inner product X'.Y' - X_{n+1} Y_{n+1}."""
    if isinstance(x, HyperbolicPoint):
        x = x.as_spacetime()
    if isinstance(y, HyperbolicPoint):
        y = y.as_spacetime()
    if x.dimension != y.dimension:
        raise ValueError("points live in different dimensions")
    return float(np.dot(x.spatial, y.spatial)) - x.height * y.height


def polar_decompose(point: SpacetimePoint) -> tuple[HyperbolicPoint, float]:
    """Split X in the open future cone as X = rho * x with x on the hyperboloid.

    Raises NotInFutureCone when X_{n+1} <= |X'|.
    """
    norm_sq = -minkowski_inner(point, point)
    if not point.in_future_cone() or norm_sq <= 0.0:
        raise NotInFutureCone(
            f"height {point.height} does not dominate |X'| = {np.linalg.norm(point.spatial)}"
        )
    rho = math.sqrt(norm_sq)
    return HyperbolicPoint(point.spatial / rho), rho


def recompose(x: HyperbolicPoint, rho: float) -> SpacetimePoint:
    """Inverse of polar_decompose: rho * x as an ambient point."""
    return SpacetimePoint(rho * x.chart, rho * x.height)


def hyperbolic_distance(x: HyperbolicPoint, y: HyperbolicPoint) -> float:
    """Geodesic distance arccosh(-<x, y>) between hyperboloid points.

    -<x, y> may fall below 1 by rounding for nearby points; values within
    ARCCOSH_CLAMP of 1 are clamped, anything lower is an error.
    """
    c = -minkowski_inner(x, y)
    if c < 1.0:
        if c < 1.0 - ARCCOSH_CLAMP:
            raise ValueError(f"arccosh argument {c} below 1 beyond rounding tolerance")
        c = 1.0
    return math.acosh(c)


def elementary_symmetric(kappas, m: int) -> float:
    """m-th elementary symmetric function of the principal curvatures.

    Evaluated by the O(n*m) prefix recurrence, which avoids the catastrophic
    cancellation of the power-sum route for mixed-sign inputs.
    """
    kappas = np.asarray(kappas, dtype=float)
    n = kappas.size
    if not 1 <= m <= n:
        raise ValueError(f"order m={m} out of range for n={n}")
    return float(_sigma_prefix(kappas, m)[m])


def elementary_symmetric_all(kappas) -> np.ndarray:
    """All sigma_1 .. sigma_n at once (sigma_0 omitted)."""
    kappas = np.asarray(kappas, dtype=float)
    return _sigma_prefix(kappas, kappas.size)[1:]


def _sigma_prefix(kappas: np.ndarray, m: int) -> np.ndarray:
    e = np.zeros(m + 1)
    e[0] = 1.0
    for i, k in enumerate(kappas):
        top = min(i + 1, m)
        for j in range(top, 0, -1):
            e[j] += k * e[j - 1]
    return e


def is_admissible(kappas, m: int) -> bool:
    """True iff sigma_1 .. sigma_m are all positive (the ellipticity cone)."""
    kappas = np.asarray(kappas, dtype=float)
    if not 1 <= m <= kappas.size:
        raise ValueError(f"order m={m} out of range for n={kappas.size}")
    sig = _sigma_prefix(kappas, m)[1 : m + 1]
    return bool(np.all(sig > 0.0))


def normalized_means(kappas, m: int) -> np.ndarray:
    """Chain (sigma_k / C(n,k))^(1/k) for k = 1..m (requires admissibility)."""
    kappas = np.asarray(kappas, dtype=float)
    n = kappas.size
    if not is_admissible(kappas, m):
        raise NotAdmissible(f"kappas {kappas} not admissible up to m={m}")
    sig = _sigma_prefix(kappas, m)[1 : m + 1]
    ks = np.arange(1, m + 1)
    binom = np.array([math.comb(n, int(k)) for k in ks], dtype=float)
    return (sig / binom) ** (1.0 / ks)


def mclaurin_check(kappas, m: int) -> tuple[bool, np.ndarray]:
    """Verify the decreasing chain of normalized means up to order m.

    Returns (ok, means) with the full chain for diagnostics.  A tiny relative
    slack absorbs rounding in the fractional powers.
    """
    means = normalized_means(kappas, m)
    slack = 1e-13 * max(1.0, float(np.max(np.abs(means))))
    ok = bool(np.all(np.diff(means) <= slack))
    return ok, means


@dataclass(frozen=True)
class CurvatureSpectrum:
    """Principal curvatures with their symmetric functions and admissibility."""

    kappas: np.ndarray
    sigmas: np.ndarray
    admissible_up_to: int

    @classmethod
    def from_kappas(cls, kappas) -> "CurvatureSpectrum":
        kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
        sigmas = elementary_symmetric_all(kappas)
        admissible = 0
        for value in sigmas:
            if value > 0.0:
                admissible += 1
            else:
                break
        return cls(kappas=kappas, sigmas=sigmas, admissible_up_to=admissible)

    @property
    def dimension(self) -> int:
        return self.kappas.size

    def sigma(self, m: int) -> float:
        if not 1 <= m <= self.dimension:
            raise ValueError(f"order m={m} out of range for n={self.dimension}")
        return float(self.sigmas[m - 1])
