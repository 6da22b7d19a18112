"""Spacelike radial graphs in Minkowski space with prescribed scalar curvature.

Solver and verification toolkit for the dilation-invariant sigma_2 curvature
prescription on entire radial graphs over the hyperboloid: singular-start ODE
integration, boundedness classification with envelope-bracketed limits,
smooth radial barriers, and an independent Cartesian finite-difference oracle.
"""

__version__ = "0.1.0"

from . import asymptotics, barriers, cartesian, lorentz, ode, prescriptions
from .asymptotics import (
    classify_boundedness,
    estimate_phi_limit,
    tail_exponent_fit,
    verify_asymptotic_ode,
)
from .barriers import build_barrier_pair
from .cartesian import CartesianPatch, big_h, h2_residual_field, to_cartesian
from .lorentz import (
    CurvatureSpectrum,
    HyperbolicPoint,
    SpacetimePoint,
    elementary_symmetric,
    hyperbolic_distance,
    is_admissible,
    mclaurin_check,
    minkowski_inner,
    polar_decompose,
)
from .ode import (
    RadialSolution,
    curvatures_at,
    f2_residual,
    integrate_s,
    ode_rhs,
    overlap_consistency,
    phi_quadrature,
    series_start,
    solve_radial,
)
from .prescriptions import DirectionalPrescription, RadialPrescription, build_family
